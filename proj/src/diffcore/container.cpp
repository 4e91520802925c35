#include "facetts/diffcore/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "facetts/common/errors.hpp"

namespace facetts::dc {

namespace {

constexpr char kMagic[8] = {'F', 'T', 'T', 'S', 'D', 'C', '0', '1'};

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

const ContainerEntry* Container::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const ContainerEntry& Container::at(const std::string& name) const {
  if (const auto* e = find(name)) return *e;
  throw ContractViolation("container has no tensor named " + name);
}

void Container::add(std::string name, Shape shape, std::vector<double> data) {
  if (numel(shape) != data.size()) throw ContractViolation("container entry " + name + ": shape/data mismatch");
  entries.push_back({std::move(name), std::move(shape), std::move(data)});
}

std::vector<unsigned char> encode_container(const Container& c) {
  nlohmann::json header;
  header["meta"] = c.meta;
  header["tensors"] = nlohmann::json::array();
  for (const auto& e : c.entries) {
    header["tensors"].push_back({{"name", e.name}, {"shape", e.shape}, {"dtype", "float64"}});
  }
  const std::string text = header.dump();
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& e : c.entries) {
    for (double v : e.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Container decode_container(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw ParseError("not a tensor container (bad magic)");
  }
  const std::uint64_t hlen = get_u64(bytes.data() + 8);
  if (hlen > bytes.size() - 16) throw ParseError("truncated container header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("container header: ") + e.what());
  }
  Container c;
  c.meta = header.value("meta", nlohmann::json::object());
  std::size_t offset = 16 + hlen;
  for (const auto& t : header.at("tensors")) {
    if (t.value("dtype", "") != "float64") throw ParseError("unsupported dtype in container");
    ContainerEntry e{t.at("name").get<std::string>(), t.at("shape").get<Shape>(), {}};
    const std::size_t n = numel(e.shape);
    if (offset + 8 * n > bytes.size()) throw ParseError("truncated container payload for " + e.name);
    e.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) e.data[i] = std::bit_cast<double>(get_u64(bytes.data() + offset + 8 * i));
    offset += 8 * n;
    c.entries.push_back(std::move(e));
  }
  if (offset != bytes.size()) throw ParseError("trailing bytes after container payload");
  return c;
}

void write_container(const std::filesystem::path& path, const Container& container) {
  const auto bytes = encode_container(container);
  // Write to a sibling temp file and rename so a crash never leaves a torn file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

void store_params(Container& out, const ParamList& params) {
  for (const auto& p : params) {
    out.add(p.name, p.tensor.shape(), std::vector<double>(p.tensor.data().begin(), p.tensor.data().end()));
  }
}

void restore_params(const Container& in, const ParamList& params) {
  for (const auto& p : params) {
    const auto* e = in.find(p.name);
    if (!e) throw ParseError("checkpoint has no tensor named " + p.name);
    if (e->shape != p.tensor.shape()) {
      throw ParseError("checkpoint tensor " + p.name + " has shape " + shape_str(e->shape) + ", expected " +
                       shape_str(p.tensor.shape()));
    }
    Tensor t = p.tensor;
    std::copy(e->data.begin(), e->data.end(), t.mutable_data().begin());
  }
}

}  // namespace facetts::dc
