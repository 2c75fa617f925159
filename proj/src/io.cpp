// io.cpp — dataset parsing/serialization, run configuration, atomic output.

#include "foldkit/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace foldkit {

// ===========================================================================
// Formatting / filesystem
// ===========================================================================

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  return buf.str();
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failure on '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot rename '" + tmp + "' to '" + path + "': " +
                  std::strerror(errno));
  }
}

// ===========================================================================
// Datasets
// ===========================================================================

namespace {

struct Token {
  std::string text;
  long column = 0;  // 1-based
};

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() &&
           !std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    out.push_back({line.substr(start, i - start),
                   static_cast<long>(start) + 1});
  }
  return out;
}

double parse_number(const Token& tok, long line_no) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.text.c_str(), &end);
  if (end != tok.text.c_str() + tok.text.size() || tok.text.empty())
    throw ParseError("expected a number, got '" + tok.text + "'", line_no,
                     tok.column);
  if (!std::isfinite(v))
    throw ParseError("non-finite value '" + tok.text + "'", line_no,
                     tok.column);
  return v;
}

long parse_positive_int(const std::string& text, const Token& tok,
                        long line_no) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size() || text.empty() || errno == ERANGE ||
      v < 1)
    throw ParseError("expected a positive integer in '" + tok.text + "'",
                     line_no, tok.column);
  return v;
}

}  // namespace

SampleSet parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  long line_no = 0;

  // Header: # foldkit v1 pL=<int> pR=<int> response=<cont|cat>
  if (!std::getline(in, line))
    throw ParseError("empty dataset: missing header", 1, 1);
  ++line_no;
  const std::vector<Token> head = tokenize(line);
  auto head_fail = [&](const std::string& msg, std::size_t tok_idx) {
    const long col = tok_idx < head.size() ? head[tok_idx].column
                                           : static_cast<long>(line.size()) + 1;
    throw ParseError(msg, line_no, col);
  };
  if (head.size() != 6) head_fail("header must have 6 fields", head.size());
  if (head[0].text != "#" || head[1].text != "foldkit")
    head_fail("header must start with '# foldkit'", 0);
  if (head[2].text != "v1")
    head_fail("unsupported format version '" + head[2].text + "'", 2);
  if (head[3].text.rfind("pL=", 0) != 0)
    head_fail("expected pL=<int>", 3);
  if (head[4].text.rfind("pR=", 0) != 0)
    head_fail("expected pR=<int>", 4);
  if (head[5].text.rfind("response=", 0) != 0)
    head_fail("expected response=<cont|cat>", 5);

  SampleSet samples;
  samples.p_l = parse_positive_int(head[3].text.substr(3), head[3], line_no);
  samples.p_r = parse_positive_int(head[4].text.substr(3), head[4], line_no);
  const std::string resp = head[5].text.substr(9);
  if (resp == "cont") {
    samples.response = ResponseKind::continuous;
  } else if (resp == "cat") {
    samples.response = ResponseKind::categorical;
  } else {
    head_fail("response must be 'cont' or 'cat', got '" + resp + "'", 5);
  }

  const Index ambient = samples.p_l * samples.p_r;
  while (std::getline(in, line)) {
    ++line_no;
    const std::vector<Token> toks = tokenize(line);
    if (toks.empty()) continue;              // blank line
    if (toks[0].text[0] == '#') continue;    // comment line
    if (static_cast<Index>(toks.size()) != 1 + ambient) {
      const long col = static_cast<Index>(toks.size()) > 1 + ambient
                           ? toks[static_cast<std::size_t>(1 + ambient)].column
                           : static_cast<long>(line.size()) + 1;
      throw ParseError("row has " + std::to_string(toks.size() - 1) +
                           " predictor values, expected " +
                           std::to_string(ambient),
                       line_no, col);
    }
    samples.y.push_back(parse_number(toks[0], line_no));
    Vector row(ambient);
    for (Index k = 0; k < ambient; ++k)
      row[k] = parse_number(toks[static_cast<std::size_t>(k) + 1], line_no);
    samples.x.push_back(mat(row, samples.p_l));
  }
  if (samples.x.empty())
    throw ParseError("dataset has no data rows", line_no, 1);
  samples.validate();
  return samples;
}

SampleSet read_dataset(const std::string& path) {
  return parse_dataset(read_file(path));
}

std::string dataset_to_string(const SampleSet& samples) {
  samples.validate();
  std::ostringstream out;
  out << "# foldkit v1 pL=" << samples.p_l << " pR=" << samples.p_r
      << " response="
      << (samples.response == ResponseKind::continuous ? "cont" : "cat")
      << "\n";
  for (Index i = 0; i < samples.n(); ++i) {
    out << fmt17(samples.y[i]);
    const Vector row = vec(samples.x[i]);
    for (Index k = 0; k < row.size(); ++k) out << " " << fmt17(row[k]);
    out << "\n";
  }
  return out.str();
}

void write_dataset(const std::string& path, const SampleSet& samples) {
  atomic_write_file(path, dataset_to_string(samples));
}

// ===========================================================================
// Run configuration
// ===========================================================================

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& msg) {
  throw ParseError(msg, 0, 0);
}

long get_int(const json& v, const std::string& key) {
  if (!v.is_number_integer())
    config_fail("configuration key '" + key + "' must be an integer");
  return v.get<long>();
}

double get_num(const json& v, const std::string& key) {
  if (!v.is_number())
    config_fail("configuration key '" + key + "' must be a number");
  return v.get<double>();
}

std::string get_str(const json& v, const std::string& key) {
  if (!v.is_string())
    config_fail("configuration key '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    // Recover line/column from the byte offset for a friendlier message.
    long line = 1, col = 1;
    for (std::size_t i = 0; i < json_text.size() && i + 1 < e.byte; ++i) {
      if (json_text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(std::string("configuration is not valid JSON: ") +
                         e.what(),
                     line, col);
  }
  if (!doc.is_object()) config_fail("configuration must be a JSON object");

  RunConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (key == "method") {
      cfg.method = get_str(value, key);
    } else if (key == "slices") {
      cfg.slices = static_cast<int>(get_int(value, key));
    } else if (key == "ml") {
      cfg.ml = static_cast<Index>(get_int(value, key));
    } else if (key == "mr") {
      cfg.mr = static_cast<Index>(get_int(value, key));
    } else if (key == "screen_l") {
      cfg.screen_l = static_cast<Index>(get_int(value, key));
    } else if (key == "screen_r") {
      cfg.screen_r = static_cast<Index>(get_int(value, key));
    } else if (key == "inversion") {
      cfg.inversion = get_str(value, key);
    } else if (key == "epsilon") {
      cfg.epsilon = get_num(value, key);
    } else if (key == "tol") {
      cfg.tol = get_num(value, key);
    } else if (key == "restarts") {
      cfg.restarts = static_cast<int>(get_int(value, key));
    } else if (key == "max_iters") {
      cfg.max_iters = static_cast<int>(get_int(value, key));
    } else if (key == "seed") {
      if (!value.is_number_unsigned() && !value.is_number_integer())
        config_fail("configuration key 'seed' must be a non-negative integer");
      if (value.is_number_integer() && !value.is_number_unsigned() &&
          value.get<long long>() < 0)
        config_fail("configuration key 'seed' must be a non-negative integer");
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "normalize_bases") {
      if (!value.is_boolean())
        config_fail("configuration key 'normalize_bases' must be a boolean");
      cfg.normalize_bases = value.get<bool>();
    } else {
      config_fail("unknown configuration key '" + key + "'");
    }
  }
  return cfg;
}

RunConfig read_run_config(const std::string& path) {
  return parse_run_config(read_file(path));
}

// ===========================================================================
// Minimal deterministic JSON emission
// ===========================================================================

std::string json_quote(const std::string& s) {
  std::string out = "\"";
  for (const char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", ch);
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  out += "\"";
  return out;
}

std::string json_matrix(const Matrix& m) {
  std::string out = "[";
  for (Index r = 0; r < m.rows(); ++r) {
    if (r > 0) out += ", ";
    out += "[";
    for (Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ", ";
      out += fmt17(m(r, c));
    }
    out += "]";
  }
  out += "]";
  return out;
}

}  // namespace foldkit
