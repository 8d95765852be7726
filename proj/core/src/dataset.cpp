#include "gdro/dataset.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gdro {

std::int64_t GroupedDataset::total_samples() const {
  std::int64_t n = 0;
  for (const auto& f : features) n += f.rows();
  return n;
}

double GroupedDataset::n_bar() const {
  return static_cast<double>(total_samples()) / num_groups();
}

std::int64_t GroupedDataset::min_group_size() const {
  std::int64_t n = features[0].rows();
  for (const auto& f : features) n = std::min<std::int64_t>(n, f.rows());
  return n;
}

double GroupedDataset::harmonic_mean_group_size() const {
  double s = 0.0;
  for (const auto& f : features) s += 1.0 / static_cast<double>(f.rows());
  return num_groups() / s;
}

void GroupedDataset::validate() const {
  if (num_groups() < 1)
    throw std::invalid_argument("dataset: needs at least one group");
  if (dim < 1) throw std::invalid_argument("dataset: dim must be >= 1");
  if (labels.size() != features.size())
    throw std::invalid_argument("dataset: label/feature group count mismatch");
  for (int i = 0; i < num_groups(); ++i) {
    if (features[i].rows() < 1)
      throw std::invalid_argument("dataset: empty group");
    if (features[i].cols() != dim)
      throw std::invalid_argument("dataset: inconsistent feature width");
    if (labels[i].size() != features[i].rows())
      throw std::invalid_argument("dataset: label count mismatch");
    for (Eigen::Index j = 0; j < labels[i].size(); ++j) {
      int y = labels[i][j];
      if (label_kind == LabelKind::binary) {
        if (y != 1 && y != -1)
          throw std::invalid_argument("dataset: binary labels must be +/-1");
      } else {
        if (y < 0 || y >= classes)
          throw std::invalid_argument("dataset: multiclass label out of range");
      }
    }
  }
}

GroupedDataset single_group(const GroupedDataset& ds, int i) {
  if (i < 0 || i >= ds.num_groups())
    throw std::out_of_range("single_group: group index out of range");
  GroupedDataset out;
  out.dim = ds.dim;
  out.label_kind = ds.label_kind;
  out.classes = ds.classes;
  out.features.push_back(ds.features[i]);
  out.labels.push_back(ds.labels[i]);
  return out;
}

namespace {

constexpr char kMagic[4] = {'G', 'D', 'R', '1'};

std::string label_kind_token(const GroupedDataset& ds) {
  if (ds.label_kind == LabelKind::binary) return "binary";
  return "multiclass:" + std::to_string(ds.classes);
}

void save_text(const GroupedDataset& ds, std::ostream& os) {
  os << "gdro v1 " << ds.num_groups() << ' ' << ds.dim << ' '
     << label_kind_token(ds) << '\n';
  char buf[64];
  for (int i = 0; i < ds.num_groups(); ++i) {
    os << "group " << i << ' ' << ds.group_size(i) << '\n';
    for (Eigen::Index j = 0; j < ds.group_size(i); ++j) {
      os << ds.labels[i][j];
      for (int d = 0; d < ds.dim; ++d) {
        std::snprintf(buf, sizeof(buf), " %.17g", ds.features[i](j, d));
        os << buf;
      }
      os << '\n';
    }
  }
}

void save_binary(const GroupedDataset& ds, std::ostream& os) {
  auto put_u64 = [&os](std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  os.write(kMagic, 4);
  put_u64(static_cast<std::uint64_t>(ds.num_groups()));
  put_u64(static_cast<std::uint64_t>(ds.dim));
  put_u64(ds.label_kind == LabelKind::binary ? 0 : 1);
  put_u64(static_cast<std::uint64_t>(ds.classes));
  for (int i = 0; i < ds.num_groups(); ++i) {
    put_u64(static_cast<std::uint64_t>(ds.group_size(i)));
    for (Eigen::Index j = 0; j < ds.group_size(i); ++j) {
      std::int64_t y = ds.labels[i][j];
      os.write(reinterpret_cast<const char*>(&y), sizeof(y));
      for (int d = 0; d < ds.dim; ++d) {
        double v = ds.features[i](j, d);
        os.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
    }
  }
}

[[noreturn]] void malformed(const std::string& what) {
  throw std::runtime_error("malformed header: " + what);
}
[[noreturn]] void truncated(const std::string& what) {
  throw std::runtime_error("truncated file: " + what);
}
[[noreturn]] void group_mismatch(const std::string& what) {
  throw std::runtime_error("group-count mismatch: " + what);
}

void parse_label_kind(const std::string& token, GroupedDataset& ds) {
  if (token == "binary") {
    ds.label_kind = LabelKind::binary;
    ds.classes = 2;
    return;
  }
  if (token.rfind("multiclass:", 0) == 0) {
    ds.label_kind = LabelKind::multiclass;
    try {
      ds.classes = std::stoi(token.substr(11));
    } catch (const std::exception&) {
      malformed("bad class count in label kind '" + token + "'");
    }
    if (ds.classes < 2) malformed("multiclass needs at least 2 classes");
    return;
  }
  malformed("unknown label kind '" + token + "'");
}

GroupedDataset load_text(std::istream& is) {
  GroupedDataset ds;
  std::string word, version, kind_token;
  std::int64_t m = 0, dim = 0;
  if (!(is >> word >> version >> m >> dim >> kind_token))
    malformed("expected 'gdro v1 <m> <dim> <label_kind>'");
  if (word != "gdro" || version != "v1")
    malformed("expected 'gdro v1' signature, got '" + word + " " + version + "'");
  if (m < 1 || dim < 1) malformed("nonpositive group count or dimension");
  ds.dim = static_cast<int>(dim);
  parse_label_kind(kind_token, ds);

  for (std::int64_t i = 0; i < m; ++i) {
    std::string tag;
    std::int64_t idx = 0, n_i = 0;
    if (!(is >> tag)) truncated("expected group " + std::to_string(i));
    if (tag != "group")
      group_mismatch("expected 'group' marker, got '" + tag + "'");
    if (!(is >> idx >> n_i)) truncated("incomplete group header");
    if (idx != i)
      group_mismatch("group index " + std::to_string(idx) + ", expected " +
                     std::to_string(i));
    if (n_i < 1) group_mismatch("group " + std::to_string(i) + " has no samples");
    FeatureMatrix x(n_i, dim);
    Eigen::VectorXi y(n_i);
    for (std::int64_t j = 0; j < n_i; ++j) {
      std::string first;
      if (!(is >> first))
        truncated("group " + std::to_string(i) + " ends early");
      if (first == "group")
        group_mismatch("group " + std::to_string(i) + " has fewer than " +
                       std::to_string(n_i) + " samples");
      try {
        y[j] = std::stoi(first);
      } catch (const std::exception&) {
        group_mismatch("expected integer label, got '" + first + "'");
      }
      for (std::int64_t d = 0; d < dim; ++d) {
        double v;
        if (!(is >> v)) truncated("sample row ends early");
        x(j, d) = v;
      }
    }
    ds.features.push_back(std::move(x));
    ds.labels.push_back(std::move(y));
  }
  std::string extra;
  if (is >> extra) {
    if (extra == "group") group_mismatch("more groups than header declares");
    group_mismatch("trailing content '" + extra + "'");
  }
  ds.validate();
  return ds;
}

GroupedDataset load_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4)) truncated("missing magic bytes");
  if (std::memcmp(magic, kMagic, 4) != 0) malformed("bad magic bytes");
  auto get_u64 = [&is](const char* what) {
    std::uint64_t v;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) truncated(what);
    return v;
  };
  GroupedDataset ds;
  std::uint64_t m = get_u64("group count");
  std::uint64_t dim = get_u64("dimension");
  std::uint64_t kind = get_u64("label kind");
  std::uint64_t classes = get_u64("class count");
  if (m < 1 || dim < 1) malformed("nonpositive group count or dimension");
  if (kind > 1) malformed("unknown label kind code");
  ds.dim = static_cast<int>(dim);
  ds.label_kind = kind == 0 ? LabelKind::binary : LabelKind::multiclass;
  ds.classes = static_cast<int>(classes);
  for (std::uint64_t i = 0; i < m; ++i) {
    std::uint64_t n_i = get_u64("group size");
    if (n_i < 1) group_mismatch("group " + std::to_string(i) + " has no samples");
    FeatureMatrix x(n_i, dim);
    Eigen::VectorXi y(n_i);
    for (std::uint64_t j = 0; j < n_i; ++j) {
      std::int64_t label;
      if (!is.read(reinterpret_cast<char*>(&label), sizeof(label)))
        truncated("sample label");
      y[j] = static_cast<int>(label);
      if (!is.read(reinterpret_cast<char*>(x.row(j).data()),
                   static_cast<std::streamsize>(dim * sizeof(double))))
        truncated("sample features");
    }
    ds.features.push_back(std::move(x));
    ds.labels.push_back(std::move(y));
  }
  if (is.peek() != std::char_traits<char>::eof())
    group_mismatch("trailing bytes after declared groups");
  ds.validate();
  return ds;
}

}  // namespace

void save_dataset(const GroupedDataset& ds, const std::string& path,
                  DatasetFormat format) {
  ds.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  if (format == DatasetFormat::text)
    save_text(ds, os);
  else
    save_binary(ds, os);
  if (!os) throw std::runtime_error("write failed: " + path);
}

GroupedDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  is.clear();
  is.seekg(0);
  if (std::memcmp(magic, kMagic, 4) == 0) return load_binary(is);
  return load_text(is);
}

}  // namespace gdro
