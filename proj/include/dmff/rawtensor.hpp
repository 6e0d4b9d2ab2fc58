#pragma once

// "rawtensor v1": one JSON header line
//   {"v":1,"dtype":"f32","shape":[H,W,C]}\n
// followed by the row-major little-endian payload.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dmff/tensor.hpp"

namespace dmff {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

static_assert(std::endian::native == std::endian::little, "payload I/O assumes a little-endian host");

enum class DType { kF32, kF64 };

inline const char* dtype_name(DType d) { return d == DType::kF32 ? "f32" : "f64"; }

inline DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::kF32;
  if (s == "f64") return DType::kF64;
  throw FormatError("unsupported dtype '" + s + "'");
}

inline std::size_t dtype_size(DType d) { return d == DType::kF32 ? 4 : 8; }

namespace detail {

template <class T>
void write_payload(std::ostream& os, const Tensor<T>& t, DType dtype) {
  if (dtype == DType::kF32) {
    std::vector<float> buf(t.data().begin(), t.data().end());
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  } else {
    std::vector<double> buf(t.data().begin(), t.data().end());
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
  }
}

// Returns false if the stream ran out before the payload was complete.
template <class T>
bool read_payload(std::istream& is, Tensor<T>& t, DType dtype) {
  if (dtype == DType::kF32) {
    std::vector<float> buf(t.size());
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (static_cast<std::size_t>(is.gcount()) != buf.size() * 4) return false;
    for (std::size_t i = 0; i < buf.size(); ++i) t[i] = static_cast<T>(buf[i]);
  } else {
    std::vector<double> buf(t.size());
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
    if (static_cast<std::size_t>(is.gcount()) != buf.size() * 8) return false;
    for (std::size_t i = 0; i < buf.size(); ++i) t[i] = static_cast<T>(buf[i]);
  }
  return true;
}

inline Shape parse_shape(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw FormatError("shape must be a non-empty array");
  Shape s;
  for (const auto& e : j) {
    if (!e.is_number_unsigned() || e.get<std::uint64_t>() == 0) throw FormatError("shape extents must be positive integers");
    s.push_back(e.get<std::size_t>());
  }
  return s;
}

}  // namespace detail

template <class T>
void write_rawtensor(std::ostream& os, const Tensor<T>& t, DType dtype = DType::kF32) {
  nlohmann::ordered_json header;
  header["v"] = 1;
  header["dtype"] = dtype_name(dtype);
  header["shape"] = t.shape();
  os << header.dump() << '\n';
  detail::write_payload(os, t, dtype);
  if (!os) throw FormatError("rawtensor: write failed");
}

template <class T>
Tensor<T> read_rawtensor(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("rawtensor: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("rawtensor: malformed header: ") + e.what());
  }
  if (!header.is_object() || header.value("v", 0) != 1) throw FormatError("rawtensor: unsupported version");
  if (!header.contains("dtype") || !header["dtype"].is_string()) throw FormatError("rawtensor: missing dtype");
  if (!header.contains("shape")) throw FormatError("rawtensor: missing shape");
  const DType dtype = parse_dtype(header["dtype"].get<std::string>());
  Tensor<T> t(detail::parse_shape(header["shape"]));
  if (!detail::read_payload(is, t, dtype)) throw FormatError("rawtensor: truncated payload");
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("rawtensor: trailing bytes after payload");
  return t;
}

template <class T>
void save_rawtensor(const std::string& path, const Tensor<T>& t, DType dtype = DType::kF32) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  write_rawtensor(os, t, dtype);
}

template <class T>
Tensor<T> load_rawtensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  return read_rawtensor<T>(is);
}

}  // namespace dmff
