#include "fairrec/csv.hpp"

#include <sstream>

#include "fairrec/common.hpp"

namespace fairrec {

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(delimiter, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

namespace {

std::string join(const std::vector<std::string>& fields, char delimiter) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(delimiter);
        out += fields[i];
    }
    return out;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

void read_delimited(const std::string& path, char delimiter,
                    const std::vector<std::string>& expect_header,
                    const std::function<void(const CsvRow&)>& on_row) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open " + path);
    std::string line;
    std::size_t line_number = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_number;
        strip_cr(line);
        if (!saw_header) {
            if (line != join(expect_header, delimiter))
                throw ParseError(path + ": line 1: expected header '" + join(expect_header, delimiter) +
                                 "', got '" + line + "'");
            saw_header = true;
            continue;
        }
        if (line.empty()) continue;
        CsvRow row;
        row.line_number = line_number;
        row.fields = split_fields(line, delimiter);
        on_row(row);
    }
    if (!saw_header) throw ParseError(path + ": empty file, header missing");
}

DelimitedWriter::DelimitedWriter(const std::string& path, char delimiter)
    : out_(path, std::ios::binary), path_(path), delimiter_(delimiter) {
    if (!out_) throw Error("cannot write " + path);
}

void DelimitedWriter::write_row(const std::vector<std::string>& fields) {
    out_ << join(fields, delimiter_) << '\n';
}

void DelimitedWriter::close() {
    out_.close();
    if (!out_) throw Error("failed writing " + path_);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << content;
    out.close();
    if (!out) throw Error("failed writing " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace fairrec
