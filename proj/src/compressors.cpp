#include "fedams/compressors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <optional>

#include "fedams/accounting.hpp"
#include "fedams/errors.hpp"

namespace fedams {
namespace {

constexpr std::uint8_t kTagDense = 0;
constexpr std::uint8_t kTagTopK = 1;
constexpr std::uint8_t kTagSign = 2;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * b);
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DimensionError("CompressedDelta: truncated buffer");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

}  // namespace

std::string to_string(CompressorKind kind) {
  switch (kind) {
    case CompressorKind::identity: return "identity";
    case CompressorKind::topk: return "topk";
    case CompressorKind::scaled_sign: return "scaled_sign";
  }
  return "unknown";
}

CompressorKind parse_compressor_kind(const std::string& name) {
  if (name == "identity") return CompressorKind::identity;
  if (name == "topk") return CompressorKind::topk;
  if (name == "scaled_sign") return CompressorKind::scaled_sign;
  throw ConfigError("unknown compressor kind '" + name + "'");
}

void CompressorSpec::validate() const {
  if (kind == CompressorKind::topk && !(ratio > 0.0 && ratio <= 1.0))
    throw ConfigError("compressor.ratio must be in (0, 1]");
}

std::size_t CompressorSpec::topk_count(std::size_t d) const {
  const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(d)));
  return std::max<std::size_t>(1, k);
}

CompressedDelta::CompressedDelta(Payload payload) : payload_(std::move(payload)) {}

std::size_t CompressedDelta::dim() const {
  return std::visit(overloaded{[](const wire::Dense& p) { return p.values.size(); },
                               [](const wire::TopK& p) { return std::size_t{p.dim}; },
                               [](const wire::SignScaled& p) { return p.signs.size(); }},
                    payload_);
}

CompressorKind CompressedDelta::kind() const {
  return std::visit(overloaded{[](const wire::Dense&) { return CompressorKind::identity; },
                               [](const wire::TopK&) { return CompressorKind::topk; },
                               [](const wire::SignScaled&) { return CompressorKind::scaled_sign; }},
                    payload_);
}

std::uint64_t CompressedDelta::bit_cost() const {
  const CostModel model;
  return std::visit(
      overloaded{[&](const wire::Dense& p) { return model.dense_bits(p.values.size()); },
                 [&](const wire::TopK& p) { return model.topk_bits(p.indices.size()); },
                 [&](const wire::SignScaled& p) { return model.scaled_sign_bits(p.signs.size()); }},
      payload_);
}

std::vector<std::uint8_t> CompressedDelta::serialize() const {
  std::vector<std::uint8_t> out;
  std::visit(overloaded{
                 [&](const wire::Dense& p) {
                   out.push_back(kTagDense);
                   put_u32(out, static_cast<std::uint32_t>(p.values.size()));
                   for (double v : p.values) put_f32(out, v);
                 },
                 [&](const wire::TopK& p) {
                   out.push_back(kTagTopK);
                   put_u32(out, p.dim);
                   put_u32(out, static_cast<std::uint32_t>(p.indices.size()));
                   for (auto idx : p.indices) put_u32(out, idx);
                   for (double v : p.values) put_f32(out, v);
                 },
                 [&](const wire::SignScaled& p) {
                   out.push_back(kTagSign);
                   put_u32(out, static_cast<std::uint32_t>(p.signs.size()));
                   put_f32(out, p.scale);
                   std::uint8_t byte = 0;
                   for (std::size_t j = 0; j < p.signs.size(); ++j) {
                     const std::uint8_t code = p.signs[j] > 0 ? 1 : (p.signs[j] < 0 ? 2 : 0);
                     byte |= static_cast<std::uint8_t>(code << (2 * (j % 4)));
                     if (j % 4 == 3) {
                       out.push_back(byte);
                       byte = 0;
                     }
                   }
                   if (p.signs.size() % 4 != 0) out.push_back(byte);
                 }},
             payload_);
  return out;
}

CompressedDelta CompressedDelta::deserialize(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const std::uint8_t tag = in.u8();
  const std::uint32_t dim = in.u32();
  std::optional<CompressedDelta> result;
  if (tag == kTagDense) {
    wire::Dense p;
    p.values.resize(dim);
    for (auto& v : p.values) v = in.f32();
    result.emplace(std::move(p));
  } else if (tag == kTagTopK) {
    wire::TopK p;
    p.dim = dim;
    const std::uint32_t k = in.u32();
    if (k > dim) throw DimensionError("CompressedDelta: k exceeds dim");
    p.indices.resize(k);
    p.values.resize(k);
    for (auto& idx : p.indices) idx = in.u32();
    for (auto& v : p.values) v = in.f32();
    result.emplace(std::move(p));
  } else if (tag == kTagSign) {
    wire::SignScaled p;
    p.scale = in.f32();
    p.signs.resize(dim);
    std::uint8_t byte = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      if (j % 4 == 0) byte = in.u8();
      const int code = (byte >> (2 * (j % 4))) & 0x3;
      if (code == 3) throw DimensionError("CompressedDelta: invalid sign code");
      p.signs[j] = code == 1 ? 1 : (code == 2 ? -1 : 0);
    }
    result.emplace(std::move(p));
  } else {
    throw DimensionError("CompressedDelta: unknown variant tag " + std::to_string(tag));
  }
  if (!in.done()) throw DimensionError("CompressedDelta: trailing bytes");
  decode(*result);  // validates indices
  return std::move(*result);
}

CompressedDelta compress(const CompressorSpec& spec, const ParamVector& x) {
  spec.validate();
  const std::size_t d = x.dim();
  if (d < 1) throw DimensionError("compress: empty vector");
  switch (spec.kind) {
    case CompressorKind::identity:
      return CompressedDelta(wire::Dense{x.values()});
    case CompressorKind::topk: {
      const std::size_t k = spec.topk_count(d);
      if (k > d) throw DimensionError("compress: k exceeds dim");
      std::vector<std::uint32_t> order(d);
      std::iota(order.begin(), order.end(), 0U);
      // Larger magnitude first; ties go to the lower index.
      auto before = [&](std::uint32_t a, std::uint32_t b) {
        const double fa = std::abs(x[a]), fb = std::abs(x[b]);
        return fa != fb ? fa > fb : a < b;
      };
      std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1),
                       order.end(), before);
      order.resize(k);
      std::sort(order.begin(), order.end());
      wire::TopK p;
      p.dim = static_cast<std::uint32_t>(d);
      p.values.reserve(k);
      for (auto idx : order) p.values.push_back(x[idx]);
      p.indices = std::move(order);
      return CompressedDelta(std::move(p));
    }
    case CompressorKind::scaled_sign: {
      wire::SignScaled p;
      p.scale = norms(x).l1 / static_cast<double>(d);
      p.signs.resize(d);
      for (std::size_t j = 0; j < d; ++j) p.signs[j] = x[j] > 0 ? 1 : (x[j] < 0 ? -1 : 0);
      return CompressedDelta(std::move(p));
    }
  }
  throw ConfigError("compress: unknown compressor kind");
}

ParamVector decode(const CompressedDelta& c) {
  return std::visit(
      overloaded{[](const wire::Dense& p) { return ParamVector(p.values); },
                 [](const wire::TopK& p) {
                   if (p.indices.size() != p.values.size())
                     throw DimensionError("decode: TopK index/value count mismatch");
                   ParamVector out(p.dim);
                   for (std::size_t n = 0; n < p.indices.size(); ++n) {
                     const auto idx = p.indices[n];
                     if (idx >= p.dim) throw DimensionError("decode: TopK index out of range");
                     if (n > 0 && idx <= p.indices[n - 1])
                       throw DimensionError("decode: TopK indices not strictly increasing");
                     out[idx] = p.values[n];
                   }
                   return out;
                 },
                 [](const wire::SignScaled& p) {
                   ParamVector out(p.signs.size());
                   for (std::size_t j = 0; j < p.signs.size(); ++j) {
                     if (p.signs[j] < -1 || p.signs[j] > 1)
                       throw DimensionError("decode: sign outside {-1, 0, +1}");
                     out[j] = p.scale * p.signs[j];
                   }
                   return out;
                 }},
      c.payload());
}

double contraction_q(const CompressorSpec& spec, const ParamVector& x) {
  spec.validate();
  const auto d = static_cast<double>(x.dim());
  switch (spec.kind) {
    case CompressorKind::identity:
      return 0.0;
    case CompressorKind::topk:
      return std::sqrt(1.0 - static_cast<double>(spec.topk_count(x.dim())) / d);
    case CompressorKind::scaled_sign: {
      const Norms n = norms(x);
      if (n.l2 == 0.0) return 0.0;
      // Compute |x|_1^2 / (d |x|_2^2) as a ratio of norms to avoid squaring
      // large magnitudes.
      const double ratio = (n.l1 / n.l2) * (n.l1 / n.l2) / d;
      return std::sqrt(std::max(0.0, 1.0 - ratio));
    }
  }
  return 0.0;
}

double compression_error(const CompressorSpec& spec, const ParamVector& x) {
  return l2_norm(decode(compress(spec, x)) - x);
}

}  // namespace fedams
