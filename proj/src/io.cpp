#include "taskaff/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace taskaff {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

void write_matrix_csv(const std::string& path, const Mat& m,
                      const std::vector<std::string>& col_names,
                      const std::vector<std::string>& row_names) {
    require(static_cast<int>(col_names.size()) == m.cols, "write_matrix_csv: column name count");
    require(static_cast<int>(row_names.size()) == m.rows, "write_matrix_csv: row name count");
    std::ostringstream out;
    out << "name";
    for (const auto& c : col_names) out << ',' << c;
    out << '\n';
    for (int i = 0; i < m.rows; ++i) {
        out << row_names[i];
        for (int j = 0; j < m.cols; ++j) out << ',' << format_double(m(i, j));
        out << '\n';
    }
    write_text_file(path, out.str());
}

NamedMatrix read_matrix_csv(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
    NamedMatrix nm;
    auto header = split_csv_line(line);
    if (header.empty()) throw std::runtime_error("malformed csv header: " + path);
    nm.col_names.assign(header.begin() + 1, header.end());
    std::vector<Vec> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw std::runtime_error("malformed csv row in " + path + ": " + line);
        }
        nm.row_names.push_back(fields[0]);
        Vec row;
        for (size_t j = 1; j < fields.size(); ++j) row.push_back(std::stod(fields[j]));
        rows.push_back(std::move(row));
    }
    nm.values = Mat(static_cast<int>(rows.size()), static_cast<int>(nm.col_names.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t j = 0; j < rows[i].size(); ++j) {
            nm.values(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
        }
    }
    return nm;
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t derive_seed(uint64_t master_seed, const std::string& stage, uint64_t run_index) {
    return SeededRng::mix(SeededRng::mix(master_seed ^ fnv1a64(stage)) + run_index);
}

}  // namespace taskaff
