#include "cornerspace/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace cornerspace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) fail(ErrorCode::io, "checkpoint: cannot open " + path + " for writing");
  }
  template <class T>
  void pod(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::int64_t>(static_cast<std::int64_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void cmat(const DenseMatrix& m) {
    pod<std::int64_t>(m.rows());
    pod<std::int64_t>(m.cols());
    out_.write(reinterpret_cast<const char*>(m.data()),
               static_cast<std::streamsize>(m.size() * sizeof(cplx)));
  }
  void rvec(const RealVector& v) {
    pod<std::int64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void op(const Operator& o) {
    switch (o.kind()) {
      case Operator::Kind::sparse: {
        pod<std::uint8_t>(0);
        const SparseMatrix& s = o.sparse();
        pod<std::int64_t>(s.rows());
        pod<std::int64_t>(s.nonZeros());
        std::vector<cplx> vals;
        vals.reserve(static_cast<std::size_t>(s.nonZeros()));
        for (Index k = 0; k < s.outerSize(); ++k) {
          for (SparseMatrix::InnerIterator it(s, k); it; ++it) {
            pod<std::int64_t>(it.row());
            pod<std::int64_t>(it.col());
            vals.push_back(it.value());
          }
        }
        pod<std::int64_t>(static_cast<std::int64_t>(vals.size()));
        out_.write(reinterpret_cast<const char*>(vals.data()),
                   static_cast<std::streamsize>(vals.size() * sizeof(cplx)));
        break;
      }
      case Operator::Kind::dense:
        pod<std::uint8_t>(1);
        cmat(o.dense());
        break;
      case Operator::Kind::factorized:
        pod<std::uint8_t>(2);
        pod<std::uint8_t>(o.left_identity());
        pod<std::uint8_t>(o.right_identity());
        cmat(o.left_factor());
        cmat(o.right_factor());
        break;
    }
  }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void close(const std::string& path) {
    out_.flush();
    if (!out_) fail(ErrorCode::io, "checkpoint: write to " + path + " failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) fail(ErrorCode::io, "checkpoint: cannot open " + path);
    in_.seekg(0, std::ios::end);
    size_ = static_cast<std::int64_t>(in_.tellg());
    in_.seekg(0);
  }
  void bytes(void* dst, std::int64_t n) {
    if (n < 0 || n > size_ - static_cast<std::int64_t>(in_.tellg()))
      fail(ErrorCode::io, "checkpoint: " + path_ + " is truncated or corrupt");
    in_.read(static_cast<char*>(dst), n);
    if (!in_) fail(ErrorCode::io, "checkpoint: read from " + path_ + " failed");
  }
  template <class T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::int64_t count() {
    const auto n = pod<std::int64_t>();
    if (n < 0) fail(ErrorCode::io, "checkpoint: negative length in " + path_);
    return n;
  }
  std::string str() {
    std::string s(static_cast<std::size_t>(count()), '\0');
    bytes(s.data(), static_cast<std::int64_t>(s.size()));
    return s;
  }
  DenseMatrix cmat() {
    const auto r = count(), c = count();
    if (r != 0 && c > size_ / r) fail(ErrorCode::io, "checkpoint: matrix too large in " + path_);
    DenseMatrix m(r, c);
    bytes(m.data(), r * c * static_cast<std::int64_t>(sizeof(cplx)));
    return m;
  }
  RealVector rvec() {
    RealVector v(count());
    bytes(v.data(), v.size() * static_cast<std::int64_t>(sizeof(double)));
    return v;
  }
  Operator op(const std::shared_ptr<const CornerIndex>& index) {
    switch (pod<std::uint8_t>()) {
      case 0: {
        const auto dim = count(), nnz = count();
        if (nnz > size_) fail(ErrorCode::io, "checkpoint: bad sparse size in " + path_);
        std::vector<std::pair<std::int64_t, std::int64_t>> pos(static_cast<std::size_t>(nnz));
        for (auto& [r, c] : pos) {
          r = pod<std::int64_t>();
          c = pod<std::int64_t>();
          if (r < 0 || r >= dim || c < 0 || c >= dim)
            fail(ErrorCode::io, "checkpoint: sparse index out of range in " + path_);
        }
        if (count() != nnz) fail(ErrorCode::io, "checkpoint: sparse value count mismatch in " + path_);
        std::vector<Triplet> t;
        t.reserve(pos.size());
        for (const auto& [r, c] : pos) {
          cplx v;
          bytes(&v, sizeof(cplx));
          t.emplace_back(r, c, v);
        }
        SparseMatrix s(dim, dim);
        s.setFromTriplets(t.begin(), t.end());
        return Operator(std::move(s));
      }
      case 1:
        return Operator(cmat());
      case 2: {
        const bool li = pod<std::uint8_t>() != 0, ri = pod<std::uint8_t>() != 0;
        DenseMatrix l = cmat(), r = cmat();
        if (!index) fail(ErrorCode::io, "checkpoint: factorized operator without corner index");
        return Operator::factorized(std::move(l), std::move(r), index, li, ri);
      }
      default:
        fail(ErrorCode::io, "checkpoint: unknown operator kind in " + path_);
    }
  }
  bool at_end() {
    return static_cast<std::int64_t>(in_.tellg()) == size_;
  }

 private:
  std::ifstream in_;
  std::string path_;
  std::int64_t size_ = 0;
};

}  // namespace

void save_cluster(const Cluster& c, const std::string& path) {
  Writer w(path);
  w.pod<char>('C');
  w.pod<char>('N');
  w.pod<char>('R');
  w.pod<char>('S');
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::int32_t>(c.geometry.lx);
  w.pod<std::int32_t>(c.geometry.ly);
  w.pod<std::uint8_t>(c.geometry.periodic_x);
  w.pod<std::uint8_t>(c.geometry.periodic_y);
  w.pod<std::int32_t>(c.n_max);
  w.pod<std::int64_t>(c.dim);
  w.pod<std::uint8_t>(c.mode == OperatorMode::fast ? 1 : 0);
  const Provenance& p = c.provenance;
  w.pod<std::uint8_t>(p.leaf);
  w.pod<std::int32_t>(p.m);
  w.pod<std::int64_t>(p.child_a_dim);
  w.pod<std::int64_t>(p.child_b_dim);
  w.str(p.child_a);
  w.str(p.child_b);
  w.pod<double>(p.captured_probability);
  w.pod<std::uint8_t>(c.corner != nullptr);
  if (c.corner) {
    const CornerIndex& ix = *c.corner;
    w.pod<std::int64_t>(ix.size());
    for (Index s = 0; s < ix.size(); ++s) {
      w.pod<std::int32_t>(ix.used_a[ix.a[s]]);
      w.pod<std::int32_t>(ix.used_b[ix.b[s]]);
    }
  }
  w.pod<std::int64_t>(static_cast<std::int64_t>(c.ops.sites.size()));
  for (const auto& s : c.ops.sites) {
    w.op(s.b);
    w.op(s.n);
    w.op(s.n2);
  }
  w.pod<std::int64_t>(static_cast<std::int64_t>(c.ops.pairs.size()));
  for (const auto& [key, po] : c.ops.pairs) {
    w.pod<std::int32_t>(key.first);
    w.pod<std::int32_t>(key.second);
    w.op(po.hop);
    w.op(po.density);
  }
  w.pod<std::uint8_t>(c.rho.has_value());
  if (c.rho) {
    w.str(c.rho->basis);
    w.cmat(c.rho->matrix);
  }
  w.pod<std::uint8_t>(c.eig.has_value());
  if (c.eig) {
    w.rvec(c.eig->values);
    w.cmat(c.eig->vectors);
  }
  w.close(path);
}

Cluster load_cluster(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "CNRS", 4) != 0) fail(ErrorCode::io, "checkpoint: " + path + " is not a CNRS file");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::io, "checkpoint: " + path + " has version " + std::to_string(version) +
                            ", expected " + std::to_string(kCheckpointVersion));
  }
  Cluster c;
  const int lx = r.pod<std::int32_t>(), ly = r.pod<std::int32_t>();
  const bool px = r.pod<std::uint8_t>() != 0, py = r.pod<std::uint8_t>() != 0;
  c.geometry = build_geometry(lx, ly, px, py);
  c.n_max = r.pod<std::int32_t>();
  c.dim = r.pod<std::int64_t>();
  c.mode = r.pod<std::uint8_t>() ? OperatorMode::fast : OperatorMode::exact;
  Provenance& p = c.provenance;
  p.leaf = r.pod<std::uint8_t>() != 0;
  p.m = r.pod<std::int32_t>();
  p.child_a_dim = r.pod<std::int64_t>();
  p.child_b_dim = r.pod<std::int64_t>();
  p.child_a = r.str();
  p.child_b = r.str();
  p.captured_probability = r.pod<double>();
  if (r.pod<std::uint8_t>()) {
    std::vector<std::pair<int, int>> ranks(static_cast<std::size_t>(r.count()));
    for (auto& [a, b] : ranks) {
      a = r.pod<std::int32_t>();
      b = r.pod<std::int32_t>();
    }
    c.corner = CornerIndex::from_pairs(ranks);
  }
  c.ops.dim = c.dim;
  const auto nsites = r.count();
  for (std::int64_t s = 0; s < nsites; ++s) {
    Operator b = r.op(c.corner), n = r.op(c.corner), n2 = r.op(c.corner);
    c.ops.sites.push_back({std::move(b), std::move(n), std::move(n2)});
  }
  const auto npairs = r.count();
  for (std::int64_t k = 0; k < npairs; ++k) {
    const int j = r.pod<std::int32_t>(), l = r.pod<std::int32_t>();
    Operator hop = r.op(c.corner), dens = r.op(c.corner);
    c.ops.pairs[{j, l}] = {std::move(hop), std::move(dens)};
  }
  if (r.pod<std::uint8_t>()) {
    std::string basis = r.str();
    c.rho = DensityMatrix{r.cmat(), std::move(basis)};
  }
  if (r.pod<std::uint8_t>()) {
    EigenDecomposition e;
    e.values = r.rvec();
    e.vectors = r.cmat();
    c.eig = std::move(e);
  }
  if (!r.at_end()) fail(ErrorCode::io, "checkpoint: trailing bytes in " + path);
  for (const auto& s : c.ops.sites) {
    if (s.b.dim() != c.dim) fail(ErrorCode::io, "checkpoint: operator dimension mismatch in " + path);
  }
  if (c.rho && c.rho->dim() != c.dim) fail(ErrorCode::io, "checkpoint: rho dimension mismatch in " + path);
  return c;
}

namespace {
void put_opt(Writer& w, const std::optional<double>& v) {
  w.pod<std::uint8_t>(v.has_value());
  w.pod<double>(v.value_or(0.0));
}
std::optional<double> get_opt(Reader& r) {
  const bool has = r.pod<std::uint8_t>() != 0;
  const double v = r.pod<double>();
  return has ? std::optional<double>(v) : std::nullopt;
}
}  // namespace

void save_summary(const SolveSummary& s, const std::string& path) {
  Writer w(path);
  w.bytes("CNRR", 4);
  w.pod<std::uint32_t>(1);
  const ObservableRecord& x = s.record;
  for (double v : {x.n, x.re_b, x.im_b, x.n_err, x.re_b_err, x.im_b_err}) w.pod<double>(v);
  put_opt(w, x.g2_onsite);
  put_opt(w, x.g2_nn);
  put_opt(w, x.g2_err);
  put_opt(w, x.g2_nn_err);
  w.pod<std::uint8_t>(x.has_errors);
  w.pod<double>(s.dt);
  w.pod<std::uint64_t>(s.seed);
  w.close(path);
}

SolveSummary load_summary(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "CNRR", 4) != 0 || r.pod<std::uint32_t>() != 1)
    fail(ErrorCode::io, "checkpoint: " + path + " is not a version 1 CNRR file");
  SolveSummary s;
  ObservableRecord& x = s.record;
  for (double* v : {&x.n, &x.re_b, &x.im_b, &x.n_err, &x.re_b_err, &x.im_b_err}) *v = r.pod<double>();
  x.g2_onsite = get_opt(r);
  x.g2_nn = get_opt(r);
  x.g2_err = get_opt(r);
  x.g2_nn_err = get_opt(r);
  x.has_errors = r.pod<std::uint8_t>() != 0;
  s.dt = r.pod<double>();
  s.seed = r.pod<std::uint64_t>();
  if (!r.at_end()) fail(ErrorCode::io, "checkpoint: trailing bytes in " + path);
  return s;
}

}  // namespace cornerspace
