#include "fm3d/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace fm3d {
namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'M', '3', 'D'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(std::uint32_t(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void bytes(const std::uint8_t* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint32_t u32() {
    const auto* p = need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* p = need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    const auto* p = need(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  const std::uint8_t* need(std::size_t n) {
    if (in_.size() - pos_ < n) throw Error(Errc::TruncatedFile, "checkpoint ends early at byte " + std::to_string(pos_));
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const noexcept { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::string momentum_name(const std::string& param) { return param + ".momentum"; }

// Layer part of "conv1.map" / "block.conv1.map".
std::string layer_of(const std::string& param) {
  const auto dot = param.rfind('.');
  return dot == std::string::npos ? param : param.substr(0, dot);
}

}  // namespace

std::string_view to_string(Precision p) noexcept { return p == Precision::Single ? "single" : "double"; }

Precision parse_precision(std::string_view text) {
  if (text == "single") return Precision::Single;
  if (text == "double") return Precision::Double;
  throw Error(Errc::BadValue, "precision must be 'single' or 'double', got '" + std::string(text) + "'");
}

const NamedTensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u8(ckpt.precision == Precision::Single ? 4 : 8);
  w.u8(ckpt.grad_mode == GradMode::Sum ? 0 : 1);
  w.u8(ckpt.variant == Variant::FilterMap ? 0 : 1);
  w.u8(0);
  w.u64(ckpt.epochs_completed);
  w.str(ckpt.net_description);
  w.str(ckpt.rng_state);
  w.u32(std::uint32_t(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (shape_size(t.dims) != t.values.size()) {
      throw Error(Errc::DimMismatch, "tensor '" + t.name + "' values do not match its dims");
    }
    w.str(t.name);
    w.u32(std::uint32_t(t.dims.size()));
    for (auto d : t.dims) w.u64(d);
    for (double v : t.values) {
      if (ckpt.precision == Precision::Single) {
        w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else {
        w.u64(std::bit_cast<std::uint64_t>(v));
      }
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(Errc::BadMagic, "not an FM3D checkpoint");
  }
  r.need(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(Errc::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                           std::to_string(kCheckpointVersion));
  }
  Checkpoint ckpt;
  const std::uint8_t width = r.u8();
  if (width != 4 && width != 8) throw Error(Errc::BadValue, "bad scalar width " + std::to_string(width));
  ckpt.precision = width == 4 ? Precision::Single : Precision::Double;
  const std::uint8_t mode = r.u8();
  const std::uint8_t variant = r.u8();
  if (mode > 1 || variant > 1) throw Error(Errc::BadValue, "bad checkpoint flags");
  ckpt.grad_mode = mode == 0 ? GradMode::Sum : GradMode::Average;
  ckpt.variant = variant == 0 ? Variant::FilterMap : Variant::Baseline;
  r.u8();
  ckpt.epochs_completed = r.u64();
  ckpt.net_description = r.str();
  ckpt.rng_state = r.str();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str();
    const std::uint32_t rank = r.u32();
    for (std::uint32_t d = 0; d < rank; ++d) t.dims.push_back(std::size_t(r.u64()));
    const std::size_t n = shape_size(t.dims);
    if (n > bytes.size()) throw Error(Errc::TruncatedFile, "tensor '" + t.name + "' larger than file");
    t.values.resize(n);
    for (auto& v : t.values) {
      v = width == 4 ? double(std::bit_cast<float>(r.u32())) : std::bit_cast<double>(r.u64());
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw Error(Errc::BadValue, "trailing bytes after checkpoint");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

template <typename T>
std::vector<NamedTensor> capture_tensors(Model<T>& model, const std::vector<Tensor<T>>& momentum) {
  std::vector<NamedTensor> out;
  const auto params = model.params();
  auto widen = [](const Tensor<T>& t) { return std::vector<double>(t.data().begin(), t.data().end()); };
  for (const auto& p : params) out.push_back({p.name, p.value->shape(), widen(*p.value)});
  for (std::size_t i = 0; i < momentum.size() && i < params.size(); ++i) {
    out.push_back({momentum_name(params[i].name), momentum[i].shape(), widen(momentum[i])});
  }
  return out;
}

template <typename T>
void restore_tensors(Model<T>& model, const Checkpoint& ckpt, std::vector<Tensor<T>>* momentum) {
  auto params = model.params();
  auto copy_into = [&](const std::string& name, Tensor<T>& dst) {
    const NamedTensor* src = ckpt.find(name);
    if (!src) {
      throw Error(Errc::DimMismatch, "layer '" + layer_of(name) + "': checkpoint has no tensor '" + name + "'");
    }
    if (src->dims != dst.shape()) {
      throw Error(Errc::DimMismatch, "layer '" + layer_of(name) + "': tensor '" + name + "' is " +
                                         shape_string(src->dims) + " in checkpoint, model expects " +
                                         shape_string(dst.shape()));
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src->values[i]);
  };
  std::size_t expected = params.size() * (momentum ? 2 : 1);
  for (const auto& p : params) copy_into(p.name, *p.value);
  if (momentum) {
    momentum->clear();
    for (const auto& p : params) {
      momentum->emplace_back(p.value->shape());
      copy_into(momentum_name(p.name), momentum->back());
    }
  }
  if (!momentum) {
    for (const auto& t : ckpt.tensors) {
      if (t.name.size() > 9 && t.name.ends_with(".momentum")) ++expected;
    }
  }
  if (ckpt.tensors.size() != expected) {
    throw Error(Errc::DimMismatch, "checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                                       " tensors, model expects " + std::to_string(expected));
  }
}

template std::vector<NamedTensor> capture_tensors(Model<float>&, const std::vector<Tensor<float>>&);
template std::vector<NamedTensor> capture_tensors(Model<double>&, const std::vector<Tensor<double>>&);
template void restore_tensors(Model<float>&, const Checkpoint&, std::vector<Tensor<float>>*);
template void restore_tensors(Model<double>&, const Checkpoint&, std::vector<Tensor<double>>*);

}  // namespace fm3d
