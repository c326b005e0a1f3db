#include <bit>
#include <cstring>
#include <sstream>

#include "bcn/error.hpp"
#include "bcn/model.hpp"

namespace bcn {

namespace {

constexpr char kMagic[8] = {'B', 'C', 'N', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    out.insert(out.end(), s.begin(), s.end());
  }
  void tensor(const std::string& name, const Tensor& t) {
    out.push_back('T');
    str(name);
    u64(t.shape.size());
    for (int d : t.shape) u64(static_cast<std::uint64_t>(d));
    for (double v : t.data) f64(v);
  }
  void text(const std::string& name, std::string_view body) {
    out.push_back('S');
    str(name);
    str(body);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  bool done() const { return pos_ == b_.size(); }
  void need(std::size_t n) {
    if (b_.size() - pos_ < n) throw Error(Errc::BadFormat, "checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint8_t byte() {
    need(1);
    return b_[pos_++];
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Tensor tensor() {
    const std::uint64_t rank = u64();
    if (rank == 0 || rank > 4) throw Error(Errc::BadFormat, "tensor rank " + std::to_string(rank));
    std::vector<int> dims;
    std::uint64_t count = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      const std::uint64_t d = u64();
      if (d > (1u << 30)) throw Error(Errc::BadFormat, "tensor dimension " + std::to_string(d));
      dims.push_back(static_cast<int>(d));
      count *= d;
    }
    need(count * 8);
    Tensor t(dims);
    for (double& v : t.data) v = f64();
    return t;
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::string merges_to_text(const std::vector<Merge>& merges) {
  std::string s;
  for (const Merge& m : merges) {
    s += std::to_string(m.left) + " " + std::to_string(m.right) + " " + std::to_string(m.id) + "\n";
  }
  return s;
}

std::vector<Merge> merges_from_text(const std::string& s) {
  std::vector<Merge> out;
  std::istringstream in(s);
  Merge m;
  while (in >> m.left >> m.right >> m.id) out.push_back(m);
  if (!in.eof()) throw Error(Errc::BadFormat, "bad merge list in checkpoint");
  return out;
}

}  // namespace

std::vector<std::uint8_t> save_bundle(const Bundle& b) {
  Writer w;
  w.out.insert(w.out.end(), std::begin(kMagic), std::end(kMagic));
  w.text("config", config_to_text(b.config));
  w.text("vocab", b.vocab.to_text());
  w.text("merges", merges_to_text(b.merges));
  for (const auto& [name, p] : b.model.all()) w.tensor("model/" + name, p.value);
  for (const auto& [name, p] : b.vq.all()) w.tensor("vq/" + name, p.value);
  return std::move(w.out);
}

Bundle load_bundle(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(Errc::BadFormat, "not a checkpoint file");
  }
  Reader r(bytes.subspan(sizeof kMagic));
  Bundle b;
  bool have_config = false, have_vocab = false;
  while (!r.done()) {
    const std::uint8_t tag = r.byte();
    const std::string name = r.str();
    if (tag == 'S') {
      const std::string body = r.str();
      if (name == "config") {
        b.config = config_from_text(body);
        have_config = true;
      } else if (name == "vocab") {
        b.vocab = Vocab::from_text(body);
        have_vocab = true;
      } else if (name == "merges") {
        b.merges = merges_from_text(body);
      } else {
        throw Error(Errc::BadFormat, "unknown checkpoint section " + name);
      }
    } else if (tag == 'T') {
      Tensor t = r.tensor();
      if (name.starts_with("model/")) {
        b.model.add(name.substr(6), std::move(t));
      } else if (name.starts_with("vq/")) {
        b.vq.add(name.substr(3), std::move(t));
      } else {
        throw Error(Errc::BadFormat, "unknown tensor block " + name);
      }
    } else {
      throw Error(Errc::BadFormat, "unknown checkpoint block tag " + std::to_string(tag));
    }
  }
  if (!have_config || !have_vocab) throw Error(Errc::BadFormat, "checkpoint lacks config or vocabulary");
  return b;
}

}  // namespace bcn
