#include "mopa/checkpoint.h"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mopa {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian");

std::string Checkpoint::meta_value(const std::string& key, const std::string& fallback) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  return fallback;
}

void save_checkpoint(const std::string& path, const ParamSet& params,
                     const std::vector<std::pair<std::string, std::string>>& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << "MOPA-CKPT 1\n";
  for (const auto& [name, t] : params.items) {
    out << "tensor " << name << " f32 " << t.rank();
    for (int d : t.shape) out << " " << d;
    out << "\n";
  }
  for (const auto& [k, v] : meta) out << "meta " << k << " " << v << "\n";
  out << "data\n";
  for (const auto& [name, t] : params.items)
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "MOPA-CKPT 1")
    throw std::runtime_error("load_checkpoint: bad magic in " + path);

  Checkpoint ck;
  std::vector<std::pair<std::string, std::vector<int>>> headers;
  while (std::getline(in, line)) {
    if (line == "data") break;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "tensor") {
      std::string name, dtype;
      int rank = 0;
      ls >> name >> dtype >> rank;
      if (dtype != "f32") throw std::runtime_error("load_checkpoint: unsupported dtype " + dtype);
      std::vector<int> shape(static_cast<std::size_t>(rank));
      for (int& d : shape) ls >> d;
      if (!ls) throw std::runtime_error("load_checkpoint: malformed tensor header: " + line);
      headers.emplace_back(name, std::move(shape));
    } else if (tag == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(value.begin());
      ck.meta.emplace_back(key, value);
    } else {
      throw std::runtime_error("load_checkpoint: unexpected header line: " + line);
    }
  }
  for (auto& [name, shape] : headers) {
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw std::runtime_error("load_checkpoint: truncated payload in " + path);
    ck.params.add(name, std::move(t));
  }
  return ck;
}

}  // namespace mopa
