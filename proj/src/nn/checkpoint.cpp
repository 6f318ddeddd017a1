// Copyright 2026 castts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "castts/nn/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace castts::nn {

namespace {

constexpr char kCkptMagic[4] = {'C', 'T', 'C', 'K'};
constexpr char kStateMagic[4] = {'C', 'T', 'S', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const std::uint32_t len = read_u32(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  return s;
}

void write_mat(std::ostream& os, const Mat& m) {
  write_u64(os, static_cast<std::uint64_t>(m.rows()));
  write_u64(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      os.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
}

Mat read_mat(std::istream& is) {
  const auto rows = static_cast<Eigen::Index>(read_u64(is));
  const auto cols = static_cast<Eigen::Index>(read_u64(is));
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      double v = 0.0;
      is.read(reinterpret_cast<char*>(&v), sizeof(v));
      m(r, c) = v;
    }
  return m;
}

void check_magic(std::istream& is, const char expect[4],
                 const std::string& path) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, expect, 4) != 0)
    throw IoError("not a checkpoint file: " + path);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<Parameter*>& params,
                     std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint: " + path.string());
  os.write(kCkptMagic, 4);
  write_u32(os, kVersion);
  write_u64(os, config_hash);
  write_u64(os, params.size());
  for (const Parameter* p : params) {
    write_string(os, p->name);
    write_mat(os, p->value);
  }
  if (!os) throw IoError("short write on checkpoint: " + path.string());
}

void load_checkpoint(const std::filesystem::path& path,
                     const std::vector<Parameter*>& params,
                     std::uint64_t expected_config_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  check_magic(is, kCkptMagic, path.string());
  const std::uint32_t version = read_u32(is);
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) +
                  " in " + path.string());
  const std::uint64_t hash = read_u64(is);
  if (hash != expected_config_hash)
    throw IoError("checkpoint " + path.string() +
                  " was written with a different model config");
  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : params) {
    if (!by_name.emplace(p->name, p).second)
      throw InvariantError("duplicate parameter name: " + p->name);
  }
  const std::uint64_t count = read_u64(is);
  std::size_t loaded = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = read_string(is);
    Mat value = read_mat(is);
    if (!is) throw IoError("truncated checkpoint: " + path.string());
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw IoError("checkpoint tensor '" + name + "' has no matching parameter");
    Parameter* p = it->second;
    if (p->value.rows() != value.rows() || p->value.cols() != value.cols())
      throw IoError("checkpoint tensor '" + name + "' shape mismatch");
    p->value = std::move(value);
    ++loaded;
  }
  if (loaded != params.size())
    throw IoError("checkpoint " + path.string() + " holds " +
                  std::to_string(loaded) + " tensors, model expects " +
                  std::to_string(params.size()));
}

void save_train_state(const std::filesystem::path& path, const Adam& opt,
                      std::int64_t iteration, const Rng& data_rng,
                      const Rng& dropout_rng) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write train state: " + path.string());
  os.write(kStateMagic, 4);
  write_u32(os, kVersion);
  write_u64(os, static_cast<std::uint64_t>(iteration));
  write_u64(os, static_cast<std::uint64_t>(opt.step_count()));
  std::ostringstream rng_ss;
  rng_ss << data_rng;
  write_string(os, rng_ss.str());
  std::ostringstream drop_ss;
  drop_ss << dropout_rng;
  write_string(os, drop_ss.str());
  write_u64(os, opt.params().size());
  for (const Parameter* p : opt.params()) {
    write_string(os, p->name);
    write_mat(os, p->adam_m);
    write_mat(os, p->adam_v);
  }
  if (!os) throw IoError("short write on train state: " + path.string());
}

void load_train_state(const std::filesystem::path& path, Adam& opt,
                      std::int64_t* iteration, Rng* data_rng,
                      Rng* dropout_rng) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open train state: " + path.string());
  check_magic(is, kStateMagic, path.string());
  const std::uint32_t version = read_u32(is);
  if (version != kVersion)
    throw IoError("unsupported train state version in " + path.string());
  *iteration = static_cast<std::int64_t>(read_u64(is));
  opt.set_step_count(static_cast<std::int64_t>(read_u64(is)));
  std::istringstream rng_ss(read_string(is));
  rng_ss >> *data_rng;
  std::istringstream drop_ss(read_string(is));
  drop_ss >> *dropout_rng;
  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : opt.params()) by_name.emplace(p->name, p);
  const std::uint64_t count = read_u64(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = read_string(is);
    Mat m = read_mat(is);
    Mat v = read_mat(is);
    if (!is) throw IoError("truncated train state: " + path.string());
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw IoError("train state tensor '" + name + "' has no matching parameter");
    it->second->adam_m = std::move(m);
    it->second->adam_v = std::move(v);
  }
}

}  // namespace castts::nn
