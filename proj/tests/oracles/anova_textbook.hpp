#pragma once

// One-way ANOVA data sets from introductory statistics texts.

#include <vector>

namespace oracle {

struct Textbook {
  std::vector<std::vector<double>> groups;
};

inline const Textbook kTextbook[] = {
    {{{1, 2, 3}, {2, 3, 4}, {10, 11, 12}}},
    {{{6, 8, 4, 5, 3, 4}, {8, 12, 9, 11, 6, 8}, {13, 9, 11, 8, 7, 12}}},
    {{{25.1, 24.3, 26.7, 25.0}, {26.2, 27.9, 25.8, 28.1}}},
    {{{3, 3.5, 4, 5}, {4.1, 4.0, 3.2, 4.4}, {3.9, 3.7, 3.8, 4.6}, {2.2, 3.1, 3.3, 3.0}}},
    {{{0.5, 0.9, 1.4, 1.2, 0.8}, {0.7, 1.1, 1.5, 1.0, 0.9}}},
};

} // namespace oracle
