#include "blocklr/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace blocklr {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

Index parse_index(std::string_view text, const std::string& what) {
  text = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v < 1) {
    throw IoError("bad " + what + ": '" + std::string(text) + "'");
  }
  return Index(v);
}

std::vector<std::string_view> header_fields(std::string_view line) {
  std::vector<std::string_view> out;
  for (auto f : split(trim(line), ' ')) {
    if (!f.empty()) out.push_back(f);
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path), text_(read_text(path)) {}

  std::string_view next(const char* what) {
    if (pos_ >= text_.size()) {
      throw IoError(path_ + ": unexpected end of file reading " + what);
    }
    const std::size_t end = text_.find('\n', pos_);
    std::string_view line(text_);
    line = line.substr(pos_, end == std::string::npos ? std::string::npos : end - pos_);
    pos_ = end == std::string::npos ? text_.size() : end + 1;
    ++line_no_;
    return line;
  }

  void expect_end() {
    while (pos_ < text_.size()) {
      if (!trim(next("trailer")).empty()) {
        throw IoError(path_ + ": unexpected content after line " + std::to_string(line_no_ - 1));
      }
    }
  }

  std::string where() const { return path_ + ":" + std::to_string(line_no_); }

 private:
  std::string path_;
  std::string text_;
  std::size_t pos_ = 0;
  int line_no_ = 0;
};

template <typename Row>
void parse_row(LineReader& in, Row&& row, Index expected) {
  const auto line = in.next("data row");
  const auto fields = split(trim(line), ',');
  if (Index(fields.size()) != expected) {
    throw IoError(in.where() + ": expected " + std::to_string(expected) + " values, got " +
                  std::to_string(fields.size()));
  }
  for (Index j = 0; j < expected; ++j) {
    try {
      row(j) = parse_double(fields[j]);
    } catch (const IoError& e) {
      throw IoError(in.where() + ": " + e.what());
    }
  }
}

template <typename Derived>
void append_row(std::string& out, const Eigen::DenseBase<Derived>& row) {
  for (Index j = 0; j < row.size(); ++j) {
    if (j) out += ',';
    out += format_double(double(row(j)));
  }
  out += '\n';
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw IoError("cannot format value");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw IoError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return ss.str();
}

void write_text(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

BlockMatrixd read_matrix(const std::string& path) {
  LineReader in(path);
  const auto head = header_fields(in.next("header"));
  if (head.size() != 3) throw IoError(in.where() + ": header must be 'M N K'");
  const Index m = parse_index(head[0], "M");
  const Index n = parse_index(head[1], "N");
  const Index k = parse_index(head[2], "K");
  Mat<double> x(m, n * k);
  for (Index i = 0; i < m; ++i) parse_row(in, x.row(i), n * k);
  in.expect_end();
  return BlockMatrixd(x, n);
}

void write_matrix(const std::string& path, const BlockMatrixd& x) {
  std::string out = std::to_string(x.rows()) + " " + std::to_string(x.block_cols()) + " " +
                    std::to_string(x.blocks()) + "\n";
  for (Index i = 0; i < x.rows(); ++i) append_row(out, x.matrix().row(i));
  write_text(path, out);
}

MeasurementSet<double> read_measurements(const std::string& path) {
  LineReader in(path);
  const auto head = header_fields(in.next("header"));
  if (head.size() != 3) throw IoError(in.where() + ": header must be 'L K sigma'");
  const Index l = parse_index(head[0], "L");
  const Index k = parse_index(head[1], "K");
  MeasurementSet<double> ms;
  try {
    ms.sigma = parse_double(head[2]);
  } catch (const IoError& e) {
    throw IoError(in.where() + ": " + e.what());
  }
  if (!(ms.sigma >= 0)) throw IoError(in.where() + ": sigma must be >= 0");
  ms.y.resize(l, k);
  for (Index i = 0; i < l; ++i) parse_row(in, ms.y.row(i), k);
  in.expect_end();
  return ms;
}

void write_measurements(const std::string& path, const MeasurementSet<double>& ms) {
  std::string out = std::to_string(ms.y.rows()) + " " + std::to_string(ms.y.cols()) + " " +
                    format_double(ms.sigma) + "\n";
  for (Index i = 0; i < ms.y.rows(); ++i) append_row(out, ms.y.row(i));
  write_text(path, out);
}

}  // namespace blocklr
