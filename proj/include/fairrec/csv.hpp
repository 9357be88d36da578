#pragma once

#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace fairrec {

/// Splits one delimited line. Fields are opaque tokens; there is no quoting,
/// which is why the enrichment records use tabs.
std::vector<std::string_view> split_fields(std::string_view line, char delimiter);

struct CsvRow {
    std::size_t line_number = 0;  // 1-based, header included
    std::vector<std::string_view> fields;
};

/// Reads a delimited file with a mandatory header. `expect_header` is matched
/// exactly after joining with `delimiter`. The callback sees every data row;
/// blank lines are skipped.
void read_delimited(const std::string& path, char delimiter,
                    const std::vector<std::string>& expect_header,
                    const std::function<void(const CsvRow&)>& on_row);

class DelimitedWriter {
public:
    DelimitedWriter(const std::string& path, char delimiter);
    void write_row(const std::vector<std::string>& fields);
    void close();

private:
    std::ofstream out_;
    std::string path_;
    char delimiter_;
};

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace fairrec
