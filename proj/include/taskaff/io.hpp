#pragma once

#include <string>
#include <vector>

#include "taskaff/numcore.hpp"

namespace taskaff {

// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

// Matrix CSV with a leading name column: header "name,<col0>,<col1>,..."
void write_matrix_csv(const std::string& path, const Mat& m,
                      const std::vector<std::string>& col_names,
                      const std::vector<std::string>& row_names);

struct NamedMatrix {
    Mat values;
    std::vector<std::string> col_names;
    std::vector<std::string> row_names;
};

NamedMatrix read_matrix_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

std::vector<std::string> split_csv_line(const std::string& line);

// FNV-1a over a byte string, used for config hashes and stage seed derivation.
uint64_t fnv1a64(const std::string& s);

// Stage seed = mix(mix(master ^ fnv1a(stage)) + run index).
uint64_t derive_seed(uint64_t master_seed, const std::string& stage, uint64_t run_index = 0);

}  // namespace taskaff
