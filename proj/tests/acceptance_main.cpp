// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.

#include "mfilm/acceptance.hpp"

#include <cstdio>
#include <iostream>

int main()
{
    const auto results = mfilm::run_acceptance();
    int failed = 0;
    for (const auto& r : results) {
        std::cout << mfilm::acceptance_summary_line(r);
        std::printf(" [%.1f s]\n", r.seconds);
        std::fflush(stdout);
        failed += r.pass ? 0 : 1;
    }
    std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
    return failed ? 1 : 0;
}
