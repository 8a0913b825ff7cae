#include "oplab/diffcore/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace oplab::diffcore {

namespace {

constexpr std::uint32_t kMagic = 0x4F504C31;  // "OPL1"

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated stream");
  return v;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  write_pod<std::int64_t>(out, m.rows());
  write_pod<std::int64_t>(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix read_matrix(std::istream& in) {
  const auto rows = read_pod<std::int64_t>(in);
  const auto cols = read_pod<std::int64_t>(in);
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated matrix data");
  return m;
}

}  // namespace

void save_store(std::ostream& out, const ParamStore& store) {
  write_pod(out, kMagic);
  write_pod<std::int64_t>(out, store.opt_t);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(store.entries.size()));
  for (const auto& [name, e] : store.entries) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_matrix(out, e.value);
    write_matrix(out, e.m);
    write_matrix(out, e.v);
  }
}

ParamStore load_store(std::istream& in) {
  if (read_pod<std::uint32_t>(in) != kMagic)
    throw std::runtime_error("checkpoint: bad magic");
  ParamStore store;
  store.opt_t = read_pod<std::int64_t>(in);
  const auto count = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    Matrix value = read_matrix(in);
    Matrix m = read_matrix(in);
    Matrix v = read_matrix(in);
    store.add(name, std::move(value));
    store.at(name).m = std::move(m);
    store.at(name).v = std::move(v);
  }
  return store;
}

void save_store_file(const std::string& path, const ParamStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  save_store(out, store);
}

ParamStore load_store_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  return load_store(in);
}

}  // namespace oplab::diffcore
