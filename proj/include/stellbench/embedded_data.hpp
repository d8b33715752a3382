#ifndef STELLBENCH_EMBEDDED_DATA_HPP
#define STELLBENCH_EMBEDDED_DATA_HPP

#include <string_view>

namespace stellbench::embedded {

// Contents of data/problem_constants.json and data/column_mapping.json at
// build time.
extern const std::string_view kProblemConstantsJson;
extern const std::string_view kColumnMappingJson;

}  // namespace stellbench::embedded

#endif  // STELLBENCH_EMBEDDED_DATA_HPP
