// Runs the validation suite and prints one line per criterion. Optional
// arguments select criteria by number.
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "hybrid/acceptance.hpp"

int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int k = 1; k < argc; ++k) ids.push_back(std::atoi(argv[k]));
  if (ids.empty())
    for (int id = 1; id <= hybrid::AcceptanceSuite::kCriteria; ++id) ids.push_back(id);

  hybrid::AcceptanceSuite suite;
  int failed = 0;
  for (int id : ids) {
    const auto r = suite.run(id);
    std::printf("%s\n", hybrid::format_result(r).c_str());
    std::fflush(stdout);
    if (!r.pass) ++failed;
  }
  std::printf("%zu criteria, %d failed\n", ids.size(), failed);
  return failed == 0 ? 0 : 1;
}
