// evec/serialize.hpp

// Copyright 2026  The evec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Little-endian binary encoding shared by all model files.
//
// Every model file starts with a 4-byte magic tag and a u32 format version,
// followed by model-specific u32 dimensions. Matrices are stored row-major
// as IEEE-754 float64.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "evec/common.hpp"

namespace evec {

static_assert(std::endian::native == std::endian::little,
              "model files assume a little-endian host");

class BinaryWriter {
 public:
  void magic(std::string_view tag, std::uint32_t version) {
    require(tag.size() == 4, "magic tag must be 4 bytes");
    buf_.append(tag);
    u32(version);
  }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string &s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void vec(const Eigen::VectorXd &v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }
  void mat(const Eigen::MatrixXd &m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
  const std::string &bytes() const { return buf_; }

 private:
  void raw(const void *p, std::size_t n) {
    buf_.append(static_cast<const char *>(p), n);
  }
  std::string buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string bytes) : buf_(std::move(bytes)) {}

  std::uint32_t magic(std::string_view tag) {
    if (buf_.size() < 8 || std::string_view(buf_).substr(0, 4) != tag)
      fail(ErrorKind::kIo, "bad magic, expected " + std::string(tag));
    pos_ = 4;
    return u32();
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  float f32() { return get<float>(); }
  double f64() { return get<double>(); }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Eigen::VectorXd vec(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = f64();
    return v;
  }
  Eigen::MatrixXd mat(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
    return m;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) fail(ErrorKind::kIo, "truncated model file");
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace evec
