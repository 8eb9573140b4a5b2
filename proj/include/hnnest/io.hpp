#pragma once

#include <hnnest/numerics.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace hnnest {

class IoError : public Error {
public:
    using Error::Error;
};

/// Locale-independent float formatting with 17 significant digits, enough
/// for bit-faithful reload of any double.
inline std::string format_double(double x) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

/// Minimal CSV emitter: '.' decimal, no quoting needs in this schema.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw IoError("cannot open for writing: " + path);
    }

    void header(const std::vector<std::string>& cols) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (i) out_ << ',';
            out_ << cols[i];
        }
        out_ << '\n';
    }

    void row(const std::vector<double>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (i) out_ << ',';
            out_ << format_double(vals[i]);
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

} // namespace hnnest
