#pragma once

#include <string_view>

// Files from data/ and templates/ compiled into the library.
namespace evidistill::resources {

std::string_view fine_grained_table_tsv();
std::string_view labeling_template();
std::string_view inference_template();

}  // namespace evidistill::resources
