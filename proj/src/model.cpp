#include "openhybrid/model.hpp"

#include <cstring>

#include "openhybrid/io_util.hpp"

namespace openhybrid {

Regime regime_from_string(const std::string& s) {
  if (s == "joint") return Regime::kJoint;
  if (s == "pretrained_encoder") return Regime::kPretrainedEncoder;
  if (s == "softmax_only") return Regime::kSoftmaxOnly;
  if (s == "raw_input_flow") return Regime::kRawInputFlow;
  throw std::invalid_argument("unknown regime: " + s);
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::kJoint: return "joint";
    case Regime::kPretrainedEncoder: return "pretrained_encoder";
    case Regime::kSoftmaxOnly: return "softmax_only";
    case Regime::kRawInputFlow: return "raw_input_flow";
  }
  return "?";
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  encoder_ = Mlp(cfg.input_dim, cfg.encoder_hidden, cfg.d_latent, cfg.encoder_act, rng);
  const std::size_t cls_in = flow_on_raw() ? cfg.input_dim : cfg.d_latent;
  classifier_ = Mlp(cls_in, cfg.classifier_hidden, cfg.n_classes, cfg.encoder_act, rng);
  const std::size_t flow_dim = flow_on_raw() ? cfg.input_dim : cfg.d_latent;
  flow_ = FlowStack(flow_dim, cfg.flow_pairs, cfg.flow_hidden, cfg.scale_cap_init, rng);
}

std::vector<Tensor*> Model::all_params() {
  std::vector<Tensor*> ps = encoder_.params();
  for (Tensor* p : classifier_.params()) ps.push_back(p);
  for (Tensor* p : flow_.params()) ps.push_back(p);
  return ps;
}

Tensor Model::encode(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != cfg_.input_dim) {
    throw std::invalid_argument("encode: expected [n, " + std::to_string(cfg_.input_dim) +
                                "], got " + shape_str(x.shape()));
  }
  Tensor h = encoder_.eval(x);
  if (!h.all_finite()) throw DivergenceError("encoder produced non-finite latent codes");
  return h;
}

Tensor Model::flow_input(const Tensor& x) const {
  return flow_on_raw() ? x : encode(x);
}

Tensor Model::logits(const Tensor& x) const {
  if (flow_on_raw()) {
    return classifier_.eval(flow_.forward(x).z);
  }
  return classifier_.eval(encode(x));
}

Tensor Model::log_prob(const Tensor& x) const { return flow_.log_prob(flow_input(x)); }

namespace {

constexpr char kMagic[4] = {'O', 'H', 'Y', 'B'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw std::runtime_error("checkpoint truncated");
  std::uint32_t v = static_cast<std::uint32_t>(in[pos]) |
                    (static_cast<std::uint32_t>(in[pos + 1]) << 8) |
                    (static_cast<std::uint32_t>(in[pos + 2]) << 16) |
                    (static_cast<std::uint32_t>(in[pos + 3]) << 24);
  pos += 4;
  return v;
}

void put_record(std::vector<std::uint8_t>& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  const std::size_t n = t.size() * sizeof(double);
  const std::size_t at = out.size();
  out.resize(at + n);
  std::memcpy(out.data() + at, t.data().data(), n);
}

void load_record(const std::vector<std::uint8_t>& in, std::size_t& pos, Tensor& into,
                 std::size_t index) {
  const std::uint32_t rank = get_u32(in, pos);
  std::vector<std::size_t> shape;
  for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(get_u32(in, pos));
  if (shape != into.shape()) {
    throw std::runtime_error("checkpoint record " + std::to_string(index) + " has shape " +
                             shape_str(shape) + ", model expects " + shape_str(into.shape()));
  }
  const std::size_t n = into.size() * sizeof(double);
  if (pos + n > in.size()) throw std::runtime_error("checkpoint truncated");
  std::memcpy(into.data().data(), in.data() + pos, n);
  pos += n;
}

}  // namespace

void Model::save(const std::string& path) const {
  std::vector<const Tensor*> records;
  for (const Tensor* t : encoder_.params()) records.push_back(t);
  for (const Tensor* t : classifier_.params()) records.push_back(t);
  for (const Tensor* t : flow_.params()) records.push_back(t);
  Tensor flag = Tensor::scalar(flow_.actnorm_initialized() ? 1.0 : 0.0);
  records.push_back(&flag);

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const Tensor* t : records) put_record(out, *t);
  io::atomic_write_bytes(path, out.data(), out.size());
}

Model Model::load(const ModelConfig& cfg, const std::string& path) {
  const std::vector<std::uint8_t> in = io::read_bytes(path);
  std::size_t pos = 0;
  if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file (bad magic): " + path);
  }
  pos = 4;
  const std::uint32_t version = get_u32(in, pos);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Model m(cfg, 0);
  std::vector<Tensor*> targets = m.all_params();
  Tensor flag = Tensor::scalar(0.0);
  targets.push_back(&flag);
  const std::uint32_t count = get_u32(in, pos);
  if (count != targets.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(count) +
                             " records, model expects " + std::to_string(targets.size()));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) load_record(in, pos, *targets[i], i);
  if (pos != in.size()) throw std::runtime_error("trailing bytes in checkpoint: " + path);
  m.flow_.set_actnorm_initialized(flag.at(0) != 0.0);
  return m;
}

}  // namespace openhybrid
