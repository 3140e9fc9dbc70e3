#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rmat/autodiff.hpp"
#include "rmat/error.hpp"

namespace rmat::ad {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_block(std::string& out, const char* tag, const std::string& text) {
  out += tag;
  out += ' ';
  out += std::to_string(text.size());
  out += '\n';
  out += text;
  out += '\n';
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : s_(bytes) {}

  std::string line() {
    const auto nl = s_.find('\n', pos_);
    if (nl == std::string::npos) fail("truncated header");
    std::string l = s_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return l;
  }

  std::string take(std::size_t n) {
    if (pos_ + n > s_.size()) fail("truncated payload");
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::string block(const std::string& tag) {
    std::istringstream hdr(line());
    std::string t;
    std::size_t n = 0;
    if (!(hdr >> t >> n) || t != tag) fail("expected '" + tag + "' block");
    std::string text = take(n);
    if (take(1) != "\n") fail("missing terminator after " + tag);
    return text;
  }

  [[noreturn]] static void fail(const std::string& why) { throw DataError("checkpoint: " + why); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out = kCheckpointMagic;
  out += '\n';
  put_block(out, "config", ckpt.config);
  put_block(out, "meta", ckpt.meta);
  out += "tensors " + std::to_string(ckpt.tensors.size()) + "\n";
  for (const auto& [name, t] : ckpt.tensors) {
    out += name;
    out += '\t';
    out += std::to_string(t.rank());
    for (std::size_t d : t.shape()) out += " " + std::to_string(d);
    out += '\n';
    const auto v = t.values();
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    out += '\n';
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.line() != kCheckpointMagic) Reader::fail("bad magic");
  Checkpoint ck;
  ck.config = r.block("config");
  ck.meta = r.block("meta");
  std::istringstream th(r.line());
  std::string tag;
  std::size_t count = 0;
  if (!(th >> tag >> count) || tag != "tensors") Reader::fail("expected tensor table");
  for (std::size_t i = 0; i < count; ++i) {
    const std::string hdr = r.line();
    const auto tab = hdr.find('\t');
    if (tab == std::string::npos) Reader::fail("bad tensor header '" + hdr + "'");
    std::istringstream dims(hdr.substr(tab + 1));
    std::size_t rank = 0;
    if (!(dims >> rank)) Reader::fail("bad rank for " + hdr.substr(0, tab));
    Shape shape(rank);
    for (auto& d : shape)
      if (!(dims >> d)) Reader::fail("bad shape for " + hdr.substr(0, tab));
    std::vector<double> values(numel(shape));
    const std::string raw = r.take(values.size() * sizeof(double));
    std::memcpy(values.data(), raw.data(), raw.size());
    if (r.take(1) != "\n") Reader::fail("missing terminator after " + hdr.substr(0, tab));
    ck.tensors.emplace_back(hdr.substr(0, tab), Tensor::from(std::move(shape), std::move(values)));
  }
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace rmat::ad
