#include "vfae/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace vfae {

void write_checkpoint(std::ostream& os, const ParameterStore& store) {
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  os << "count " << store.size() << '\n';
  os << std::setprecision(17);
  for (const Parameter& p : store) {
    os << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
    for (Index i = 0; i < p.value.rows(); ++i) {
      for (Index j = 0; j < p.value.cols(); ++j) {
        if (j) os << ' ';
        os << p.value(i, j);
      }
      os << '\n';
    }
  }
  os << "end\n";
}

ParameterStore read_checkpoint(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kCheckpointMagic) {
    throw IoError("not a checkpoint (bad magic header)");
  }
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  std::string tag;
  std::size_t count = 0;
  if (!(is >> tag >> count) || tag != "count") throw IoError("checkpoint: missing count");
  ParameterStore store;
  for (std::size_t k = 0; k < count; ++k) {
    std::string name;
    Index rows = 0, cols = 0;
    if (!(is >> tag >> name >> rows >> cols) || tag != "param" || rows < 0 || cols < 0) {
      throw IoError("checkpoint: malformed entry " + std::to_string(k));
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) {
        if (!(is >> m(i, j))) throw IoError("checkpoint: truncated values for " + name);
      }
    }
    store.add(name, std::move(m));
  }
  if (!(is >> tag) || tag != "end") throw IoError("checkpoint: missing end marker");
  return store;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  write_checkpoint(os, store);
  if (!os) throw IoError("write failed: " + path.string());
}

ParameterStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  return read_checkpoint(is);
}

void load_checkpoint_into(const std::filesystem::path& path, ParameterStore& store) {
  store.assign_values(load_checkpoint(path));
}

}  // namespace vfae
