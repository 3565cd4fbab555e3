#include "sasv/checkpoint.hpp"

#include "sasv/format.hpp"

#include <fstream>
#include <sstream>

namespace sasv {
namespace {

void write_values(std::ostream &os, std::string_view tag, std::size_t layer,
                  const std::vector<double> &v) {
  os << tag << ' ' << layer << ' ' << v.size();
  for (double x : v)
    os << ' ' << format_double(x);
  os << '\n';
}

void write_branch(std::ostream &os, int index, const MlpModel &m, const BranchInputSpec &spec) {
  os << "branch " << index << '\n';
  os << "spec";
  for (auto s : spec.sources)
    os << ' ' << to_string(s);
  os << '\n';
  os << "dims";
  for (auto d : m.dims())
    os << ' ' << d;
  os << '\n';
  os << "activation " << to_string(m.activation().kind) << ' '
     << format_double(m.activation().slope) << '\n';
  for (std::size_t l = 0; l < m.layers().size(); ++l) {
    write_values(os, "weights", l, m.layers()[l].weights);
    write_values(os, "bias", l, m.layers()[l].bias);
  }
}

class LineReader {
public:
  LineReader(std::istream &is, std::string_view source) : is_(is), source_(source) {}

  std::vector<std::string_view> next(std::string_view expected_tag) {
    for (;;) {
      if (!std::getline(is_, line_))
        fail("unexpected end of file, expected '" + std::string(expected_tag) + "'");
      ++lineno_;
      auto f = split_fields(line_);
      if (f.empty())
        continue;
      if (f.front() != expected_tag)
        fail("expected '" + std::string(expected_tag) + "', found '" + std::string(f.front()) + "'");
      return f;
    }
  }

  [[noreturn]] void fail(const std::string &what) const {
    throw Error(std::string(source_) + ":" + std::to_string(lineno_) + ": " + what);
  }

  std::size_t to_size(std::string_view tok) const {
    auto v = parse_int(tok);
    if (!v || *v < 0)
      fail("invalid integer '" + std::string(tok) + "'");
    return static_cast<std::size_t>(*v);
  }

  double to_double(std::string_view tok) const {
    auto v = parse_double(tok);
    if (!v)
      fail("invalid number '" + std::string(tok) + "'");
    return *v;
  }

  std::istream &stream() { return is_; }
  std::size_t lineno() const { return lineno_; }

private:
  std::istream &is_;
  std::string_view source_;
  std::string line_;
  std::size_t lineno_ = 0;
};

std::vector<double> read_values(LineReader &r, std::string_view tag, std::size_t layer,
                                std::size_t expected) {
  auto f = r.next(tag);
  if (f.size() < 3 || r.to_size(f[1]) != layer)
    r.fail("expected " + std::string(tag) + " for layer " + std::to_string(layer));
  const std::size_t n = r.to_size(f[2]);
  if (n != expected || f.size() != n + 3)
    r.fail(std::string(tag) + " of layer " + std::to_string(layer) + " should hold " +
           std::to_string(expected) + " values");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = r.to_double(f[i + 3]);
  return v;
}

std::pair<MlpModel, BranchInputSpec> read_branch(LineReader &r, int index) {
  auto f = r.next("branch");
  if (f.size() != 2 || r.to_size(f[1]) != static_cast<std::size_t>(index))
    r.fail("expected branch " + std::to_string(index));

  BranchInputSpec spec;
  f = r.next("spec");
  try {
    for (std::size_t i = 1; i < f.size(); ++i)
      spec.sources.push_back(parse_feature_source(f[i]));
    spec.validate();
  } catch (const Error &e) {
    r.fail(e.what());
  }

  f = r.next("dims");
  std::vector<std::size_t> dims;
  for (std::size_t i = 1; i < f.size(); ++i)
    dims.push_back(r.to_size(f[i]));

  f = r.next("activation");
  if (f.size() != 3)
    r.fail("expected `activation <kind> <slope>`");
  Activation act;
  try {
    act.kind = parse_activation(f[1]);
  } catch (const Error &e) {
    r.fail(e.what());
  }
  act.slope = r.to_double(f[2]);

  MlpModel m;
  try {
    m = MlpModel(dims, act);
  } catch (const Error &e) {
    r.fail(e.what());
  }
  auto &layers = m.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weights = read_values(r, "weights", l, layers[l].weights.size());
    layers[l].bias = read_values(r, "bias", l, layers[l].bias.size());
  }
  try {
    m.validate();
  } catch (const Error &e) {
    r.fail(e.what());
  }
  return {std::move(m), std::move(spec)};
}

} // namespace

void write_checkpoint(std::ostream &os, const Checkpoint &ckpt) {
  os << kCheckpointHeader << '\n';
  std::visit(
      [&](const auto &m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, SingleModel>) {
          os << "architecture single\n";
          os << "tau " << format_double(ckpt.tau) << '\n';
          write_branch(os, 1, m.net, m.spec);
        } else {
          os << "architecture parallel\n";
          os << "tau " << format_double(ckpt.tau) << '\n';
          write_branch(os, 1, m.branch1, m.spec1);
          write_branch(os, 2, m.branch2, m.spec2);
        }
      },
      ckpt.model);
  os << "end\n";
}

void write_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
  std::ostringstream buf;
  write_checkpoint(buf, ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f)
    throw Error("cannot open '" + path.string() + "' for writing");
  f << buf.str();
  f.flush();
  if (!f)
    throw Error("write failed for '" + path.string() + "'");
}

Checkpoint read_checkpoint(std::istream &is, std::string_view source) {
  LineReader r(is, source);
  auto f = r.next(kCheckpointHeader);
  if (f.size() != 1)
    r.fail("malformed header");
  f = r.next("architecture");
  if (f.size() != 2 || (f[1] != "single" && f[1] != "parallel"))
    r.fail("architecture must be single or parallel");
  const bool parallel = f[1] == "parallel";
  f = r.next("tau");
  if (f.size() != 2)
    r.fail("expected `tau <value>`");
  Checkpoint ckpt;
  ckpt.tau = r.to_double(f[1]);
  if (parallel) {
    auto [m1, s1] = read_branch(r, 1);
    auto [m2, s2] = read_branch(r, 2);
    ParallelModel pm{std::move(m1), std::move(m2), std::move(s1), std::move(s2)};
    try {
      pm.validate();
    } catch (const Error &e) {
      r.fail(e.what());
    }
    ckpt.model = std::move(pm);
  } else {
    auto [m, s] = read_branch(r, 1);
    ckpt.model = SingleModel{std::move(m), std::move(s)};
  }
  r.next("end");
  return ckpt;
}

Checkpoint read_checkpoint(const std::filesystem::path &path) {
  std::ifstream f(path);
  if (!f)
    throw Error("cannot open '" + path.string() + "' for reading");
  return read_checkpoint(f, path.string());
}

} // namespace sasv
