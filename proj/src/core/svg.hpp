#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cvf::svg {

struct series {
    std::string name;
    std::map<int64_t, double> bins;
};

// Standalone grouped bar chart. Pure function of its arguments with fixed
// number formatting, so identical input yields byte-identical output.
std::string bar_chart(const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<series>& data);

} // namespace cvf::svg
