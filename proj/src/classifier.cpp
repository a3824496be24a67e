#include "sempl/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "sempl/corpus.hpp"
#include "sempl/errors.hpp"
#include "sempl/util.hpp"

namespace sempl {

void TrainConfig::validate() const {
  if (epochs < 1) throw UsageError("train config: epochs must be >= 1");
  if (batch_size < 1) throw UsageError("train config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw UsageError("train config: learning_rate must be > 0");
  if (weight_decay < 0.0) throw UsageError("train config: weight_decay must be >= 0");
  if (warmup_steps < 0) throw UsageError("train config: warmup_steps must be >= 0");
  if (max_sequence_length < 16)
    throw UsageError("train config: max_sequence_length must be >= 16");
}

TrainConfig default_config_for_mode(PromptMode mode) {
  TrainConfig c;
  c.epochs = 10;
  c.learning_rate = 1e-5;
  c.weight_decay = 0.01;
  c.batch_size = mode == PromptMode::baseline ? 8 : 16;
  c.warmup_steps = mode == PromptMode::evt ? 100 : 10;
  return c;
}

TrainConfig compact_desk_config() {
  TrainConfig c;
  c.epochs = 10;
  c.batch_size = 8;
  c.learning_rate = 3e-3;
  c.weight_decay = 0.01;
  c.warmup_steps = 10;
  c.max_sequence_length = 256;
  c.encoder_id = "compact";
  return c;
}

int CompactEncoderSpec::vocab_size() const {
  // PAD, CLS, twelve markers, then the hashed buckets.
  return 2 + static_cast<int>(reserved_markers().size()) + vocab_buckets;
}

CompactEncoderSpec parse_encoder_id(const std::string& encoder_id) {
  CompactEncoderSpec spec;
  if (encoder_id == "compact") return spec;
  if (starts_with(encoder_id, "compact-")) {
    // "compact-<dim>x<layers>"
    std::string rest = encoder_id.substr(8);
    auto x = rest.find('x');
    if (x != std::string::npos) {
      try {
        spec.dim = std::stoi(rest.substr(0, x));
        spec.layers = std::stoi(rest.substr(x + 1));
      } catch (const std::exception&) {
        throw UsageError("bad compact encoder id: " + encoder_id);
      }
      if (spec.dim < 8 || spec.dim % 8 != 0 || spec.layers < 1 || spec.layers > 8)
        throw UsageError("bad compact encoder id: " + encoder_id);
      spec.heads = std::max(1, spec.dim / 8);
      spec.ffn = 2 * spec.dim;
      return spec;
    }
    throw UsageError("bad compact encoder id: " + encoder_id);
  }
  throw EnvError("encoder '" + encoder_id +
                 "' is not available in this environment (external checkpoints and "
                 "accelerator hardware required); use the compact encoder family");
}

// ---------------------------------------------------------------------------
// Tokenizer

MarkerTokenizer::MarkerTokenizer(int vocab_buckets) : buckets_(vocab_buckets) {}

int MarkerTokenizer::vocab_size() const {
  return 2 + static_cast<int>(reserved_markers().size()) + buckets_;
}

namespace {

bool is_splitting_punct(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '"': case '(': case ')': case '[': case ']':
      return true;
    default:
      return false;
  }
}

// Splits a whitespace-free chunk into tokens, keeping reserved markers atomic
// and peeling punctuation into single-character tokens.
void split_chunk(const std::string& chunk, std::vector<std::string>& out) {
  if (chunk.empty()) return;
  // Markers first: they may sit flush against other text ("[STYPE]person").
  for (const auto& m : reserved_markers()) {
    auto pos = chunk.find(m);
    if (pos != std::string::npos) {
      split_chunk(chunk.substr(0, pos), out);
      out.push_back(m);
      split_chunk(chunk.substr(pos + m.size()), out);
      return;
    }
  }
  std::size_t begin = 0, end = chunk.size();
  while (begin < end && is_splitting_punct(chunk[begin]))
    out.push_back(std::string(1, chunk[begin++]));
  std::vector<std::string> tail;
  while (end > begin && is_splitting_punct(chunk[end - 1]))
    tail.insert(tail.begin(), std::string(1, chunk[--end]));
  if (end > begin) out.push_back(chunk.substr(begin, end - begin));
  out.insert(out.end(), tail.begin(), tail.end());
}

}  // namespace

std::vector<std::string> MarkerTokenizer::tokenize(const std::string& text) const {
  std::vector<std::string> out;
  for (const auto& chunk : split_whitespace(text)) split_chunk(chunk, out);
  return out;
}

std::vector<int> MarkerTokenizer::encode(const std::string& text, int max_len,
                                         bool* truncated) const {
  if (trim(text).empty()) throw DataError("tokenizer: empty input text");
  auto tokens = tokenize(text);
  std::vector<int> ids;
  ids.reserve(tokens.size() + 1);
  ids.push_back(kClsId);
  const auto& markers = reserved_markers();
  for (const auto& tok : tokens) {
    int id = -1;
    for (std::size_t m = 0; m < markers.size(); ++m) {
      if (tok == markers[m]) {
        id = 2 + static_cast<int>(m);
        break;
      }
    }
    if (id < 0)
      id = 2 + static_cast<int>(markers.size()) +
           static_cast<int>(fnv1a64(tok) % static_cast<std::uint64_t>(buckets_));
    ids.push_back(id);
  }
  bool overflow = static_cast<int>(ids.size()) > max_len;
  if (overflow) ids.resize(max_len);
  if (truncated) *truncated = overflow;
  return ids;
}

// ---------------------------------------------------------------------------
// Compact transformer encoder (pre-LN, GELU feed-forward, CLS pooling) with
// manual backward passes, double precision throughout.

namespace {

struct NormalGen {
  std::mt19937_64 rng;
  bool has_spare = false;
  double spare = 0.0;

  explicit NormalGen(std::uint64_t seed) : rng(seed) {}

  double uniform() {  // (0, 1]
    return (static_cast<double>(rng() >> 11) + 1.0) * (1.0 / 9007199254740992.0);
  }

  // Box-Muller; std::normal_distribution is implementation-defined, this is not.
  double next() {
    if (has_spare) {
      has_spare = false;
      return spare;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare = r * std::sin(theta);
    has_spare = true;
    return r * std::cos(theta);
  }
};

std::uint64_t derive_seed(std::uint64_t seed, const char* tag) {
  return fnv1a64(tag) ^ (seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
}

constexpr double kLnEps = 1e-5;

// C(n x m) += A(n x k) * B(k x m)
void matmul_nn(const double* A, const double* B, double* C, int n, int k, int m) {
  for (int i = 0; i < n; ++i) {
    const double* a = A + static_cast<std::size_t>(i) * k;
    double* c = C + static_cast<std::size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      double av = a[p];
      if (av == 0.0) continue;
      const double* b = B + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) c[j] += av * b[j];
    }
  }
}

// C(n x k) += A(n x m) * B(k x m)^T
void matmul_nt(const double* A, const double* B, double* C, int n, int m, int k) {
  for (int i = 0; i < n; ++i) {
    const double* a = A + static_cast<std::size_t>(i) * m;
    double* c = C + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const double* b = B + static_cast<std::size_t>(j) * m;
      double s = 0.0;
      for (int p = 0; p < m; ++p) s += a[p] * b[p];
      c[j] += s;
    }
  }
}

// C(k x m) += A(n x k)^T * B(n x m)
void matmul_tn(const double* A, const double* B, double* C, int n, int k, int m) {
  for (int i = 0; i < n; ++i) {
    const double* a = A + static_cast<std::size_t>(i) * k;
    const double* b = B + static_cast<std::size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      double av = a[p];
      if (av == 0.0) continue;
      double* c = C + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) c[j] += av * b[j];
    }
  }
}

void ln_forward(const double* x, const double* gamma, const double* beta, double* y,
                double* xhat, double* rstd, int rows, int d) {
  for (int t = 0; t < rows; ++t) {
    const double* xr = x + static_cast<std::size_t>(t) * d;
    double* yr = y + static_cast<std::size_t>(t) * d;
    double* hr = xhat + static_cast<std::size_t>(t) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xr[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double c = xr[j] - mean;
      var += c * c;
    }
    var /= d;
    double rs = 1.0 / std::sqrt(var + kLnEps);
    rstd[t] = rs;
    for (int j = 0; j < d; ++j) {
      hr[j] = (xr[j] - mean) * rs;
      yr[j] = gamma[j] * hr[j] + beta[j];
    }
  }
}

// Accumulates dx, dgamma, dbeta from dy and the cached normalization.
void ln_backward(const double* dy, const double* xhat, const double* rstd,
                 const double* gamma, double* dx, double* dgamma, double* dbeta,
                 int rows, int d) {
  for (int t = 0; t < rows; ++t) {
    const double* dyr = dy + static_cast<std::size_t>(t) * d;
    const double* hr = xhat + static_cast<std::size_t>(t) * d;
    double* dxr = dx + static_cast<std::size_t>(t) * d;
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (int j = 0; j < d; ++j) {
      double dxhat = dyr[j] * gamma[j];
      mean_dxhat += dxhat;
      mean_dxhat_xhat += dxhat * hr[j];
      dgamma[j] += dyr[j] * hr[j];
      dbeta[j] += dyr[j];
    }
    mean_dxhat /= d;
    mean_dxhat_xhat /= d;
    for (int j = 0; j < d; ++j) {
      double dxhat = dyr[j] * gamma[j];
      dxr[j] += rstd[t] * (dxhat - mean_dxhat - hr[j] * mean_dxhat_xhat);
    }
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
         x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

struct LayerOffsets {
  std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
  std::size_t ln2_g, ln2_b, w1, b1, w2, b2;
};

struct Layout {
  std::size_t tok_emb = 0, pos_emb = 0;
  std::vector<LayerOffsets> layers;
  std::size_t lnf_g = 0, lnf_b = 0, head_w = 0, head_b = 0;
  std::size_t total = 0;

  Layout() = default;
  explicit Layout(const CompactEncoderSpec& s) {
    const std::size_t d = s.dim, f = s.ffn;
    std::size_t off = 0;
    auto take = [&off](std::size_t n) {
      std::size_t o = off;
      off += n;
      return o;
    };
    tok_emb = take(static_cast<std::size_t>(s.vocab_size()) * d);
    pos_emb = take(static_cast<std::size_t>(s.max_positions) * d);
    layers.resize(s.layers);
    for (auto& L : layers) {
      L.ln1_g = take(d); L.ln1_b = take(d);
      L.wq = take(d * d); L.bq = take(d);
      L.wk = take(d * d); L.bk = take(d);
      L.wv = take(d * d); L.bv = take(d);
      L.wo = take(d * d); L.bo = take(d);
      L.ln2_g = take(d); L.ln2_b = take(d);
      L.w1 = take(d * f); L.b1 = take(f);
      L.w2 = take(f * d); L.b2 = take(d);
    }
    lnf_g = take(d); lnf_b = take(d);
    head_w = take(d * 2); head_b = take(2);
    total = off;
  }
};

}  // namespace

class CompactModel {
 public:
  CompactModel(const CompactEncoderSpec& spec, const std::string& encoder_id)
      : spec_(spec), layout_(spec), params_(layout_.total, 0.0), grads_(layout_.total, 0.0) {
    init_base_weights(encoder_id);
  }

  const CompactEncoderSpec& spec() const { return spec_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& grads() { return grads_; }

  void zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

  void init_head(std::uint64_t seed) {
    NormalGen gen(derive_seed(seed, "classifier-head"));
    double* w = params_.data() + layout_.head_w;
    for (int i = 0; i < spec_.dim * 2; ++i) w[i] = 0.02 * gen.next();
    params_[layout_.head_b] = 0.0;
    params_[layout_.head_b + 1] = 0.0;
  }

  // Probability of the plausible class.
  double forward(const std::vector<int>& ids) const {
    Cache cache;
    return run_forward(ids, &cache);
  }

  // Cross-entropy loss; gradients are accumulated scaled by `weight`.
  double forward_backward(const std::vector<int>& ids, int gold, double weight) {
    Cache cache;
    run_forward(ids, &cache);
    run_backward(ids, gold, weight, cache);
    double p = gold == 1 ? cache.p1 : 1.0 - cache.p1;
    return -std::log(std::max(p, 1e-300));
  }

  void serialize(std::ostream& out) const;
  static std::unique_ptr<CompactModel> deserialize(std::istream& in, std::string* encoder_id);

 private:
  struct Cache {
    int T = 0;
    std::vector<double> x0;
    struct LayerCache {
      std::vector<double> x_in, u, u_hat, u_rstd;
      std::vector<double> q, k, v, probs, ctx, x_mid;
      std::vector<double> u2, u2_hat, u2_rstd;
      std::vector<double> h1, g;
    };
    std::vector<LayerCache> layers;
    std::vector<double> x_final;
    std::vector<double> cls_hat;  // normalized CLS row
    std::vector<double> cls_out;  // post-LN CLS features
    double cls_rstd = 0.0;
    double logits[2] = {0.0, 0.0};
    double p1 = 0.5;
  };

  void init_base_weights(const std::string& encoder_id) {
    // Deterministic function of the encoder id: the desk-scale stand-in for a
    // pretrained checkpoint. Heads stay zero until init_head.
    NormalGen gen(derive_seed(fnv1a64(encoder_id), "encoder-base"));
    const std::size_t d = spec_.dim;
    auto fill_normal = [&](std::size_t off, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) params_[off + i] = 0.02 * gen.next();
    };
    auto fill_const = [&](std::size_t off, std::size_t n, double v) {
      for (std::size_t i = 0; i < n; ++i) params_[off + i] = v;
    };
    fill_normal(layout_.tok_emb, static_cast<std::size_t>(spec_.vocab_size()) * d);
    fill_normal(layout_.pos_emb, static_cast<std::size_t>(spec_.max_positions) * d);
    for (const auto& L : layout_.layers) {
      fill_const(L.ln1_g, d, 1.0);
      fill_normal(L.wq, d * d);
      fill_normal(L.wk, d * d);
      fill_normal(L.wv, d * d);
      fill_normal(L.wo, d * d);
      fill_const(L.ln2_g, d, 1.0);
      fill_normal(L.w1, d * spec_.ffn);
      fill_normal(L.w2, static_cast<std::size_t>(spec_.ffn) * d);
    }
    fill_const(layout_.lnf_g, d, 1.0);
  }

  double run_forward(const std::vector<int>& ids, Cache* cache) const {
    const int T = static_cast<int>(ids.size());
    const int d = spec_.dim;
    const int H = spec_.heads;
    const int dk = d / H;
    const int f = spec_.ffn;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    const double* P = params_.data();

    cache->T = T;
    cache->x0.assign(static_cast<std::size_t>(T) * d, 0.0);
    for (int t = 0; t < T; ++t) {
      const double* tok = P + layout_.tok_emb + static_cast<std::size_t>(ids[t]) * d;
      const double* pos = P + layout_.pos_emb + static_cast<std::size_t>(t) * d;
      double* x = cache->x0.data() + static_cast<std::size_t>(t) * d;
      for (int j = 0; j < d; ++j) x[j] = tok[j] + pos[j];
    }

    std::vector<double> x = cache->x0;
    cache->layers.resize(spec_.layers);
    for (int l = 0; l < spec_.layers; ++l) {
      const auto& L = layout_.layers[l];
      auto& C = cache->layers[l];
      const std::size_t Td = static_cast<std::size_t>(T) * d;
      C.x_in = x;
      C.u.assign(Td, 0.0);
      C.u_hat.assign(Td, 0.0);
      C.u_rstd.assign(T, 0.0);
      ln_forward(x.data(), P + L.ln1_g, P + L.ln1_b, C.u.data(), C.u_hat.data(),
                 C.u_rstd.data(), T, d);

      C.q.assign(Td, 0.0);
      C.k.assign(Td, 0.0);
      C.v.assign(Td, 0.0);
      for (int t = 0; t < T; ++t) {
        double* q = C.q.data() + static_cast<std::size_t>(t) * d;
        double* k = C.k.data() + static_cast<std::size_t>(t) * d;
        double* v = C.v.data() + static_cast<std::size_t>(t) * d;
        for (int j = 0; j < d; ++j) {
          q[j] = P[L.bq + j];
          k[j] = P[L.bk + j];
          v[j] = P[L.bv + j];
        }
      }
      matmul_nn(C.u.data(), P + L.wq, C.q.data(), T, d, d);
      matmul_nn(C.u.data(), P + L.wk, C.k.data(), T, d, d);
      matmul_nn(C.u.data(), P + L.wv, C.v.data(), T, d, d);

      C.probs.assign(static_cast<std::size_t>(H) * T * T, 0.0);
      C.ctx.assign(Td, 0.0);
      std::vector<double> row(T);
      for (int h = 0; h < H; ++h) {
        const int hoff = h * dk;
        for (int i = 0; i < T; ++i) {
          const double* qi = C.q.data() + static_cast<std::size_t>(i) * d + hoff;
          double maxv = -1e300;
          for (int j = 0; j < T; ++j) {
            const double* kj = C.k.data() + static_cast<std::size_t>(j) * d + hoff;
            double s = 0.0;
            for (int c = 0; c < dk; ++c) s += qi[c] * kj[c];
            row[j] = s * scale;
            maxv = std::max(maxv, row[j]);
          }
          double sum = 0.0;
          for (int j = 0; j < T; ++j) {
            row[j] = std::exp(row[j] - maxv);
            sum += row[j];
          }
          double* probs =
              C.probs.data() + (static_cast<std::size_t>(h) * T + i) * T;
          double* ctx = C.ctx.data() + static_cast<std::size_t>(i) * d + hoff;
          for (int j = 0; j < T; ++j) {
            probs[j] = row[j] / sum;
            const double* vj = C.v.data() + static_cast<std::size_t>(j) * d + hoff;
            for (int c = 0; c < dk; ++c) ctx[c] += probs[j] * vj[c];
          }
        }
      }

      C.x_mid = C.x_in;
      for (int t = 0; t < T; ++t) {
        double* xm = C.x_mid.data() + static_cast<std::size_t>(t) * d;
        for (int j = 0; j < d; ++j) xm[j] += P[L.bo + j];
      }
      matmul_nn(C.ctx.data(), P + L.wo, C.x_mid.data(), T, d, d);

      C.u2.assign(Td, 0.0);
      C.u2_hat.assign(Td, 0.0);
      C.u2_rstd.assign(T, 0.0);
      ln_forward(C.x_mid.data(), P + L.ln2_g, P + L.ln2_b, C.u2.data(), C.u2_hat.data(),
                 C.u2_rstd.data(), T, d);

      C.h1.assign(static_cast<std::size_t>(T) * f, 0.0);
      for (int t = 0; t < T; ++t) {
        double* h1 = C.h1.data() + static_cast<std::size_t>(t) * f;
        for (int j = 0; j < f; ++j) h1[j] = P[L.b1 + j];
      }
      matmul_nn(C.u2.data(), P + L.w1, C.h1.data(), T, d, f);
      C.g.assign(static_cast<std::size_t>(T) * f, 0.0);
      for (std::size_t i = 0; i < C.g.size(); ++i) C.g[i] = gelu(C.h1[i]);

      x = C.x_mid;
      for (int t = 0; t < T; ++t) {
        double* xr = x.data() + static_cast<std::size_t>(t) * d;
        for (int j = 0; j < d; ++j) xr[j] += P[L.b2 + j];
      }
      matmul_nn(C.g.data(), P + L.w2, x.data(), T, f, d);
    }

    cache->x_final = x;
    cache->cls_hat.assign(d, 0.0);
    cache->cls_out.assign(d, 0.0);
    ln_forward(x.data(), P + layout_.lnf_g, P + layout_.lnf_b, cache->cls_out.data(),
               cache->cls_hat.data(), &cache->cls_rstd, 1, d);

    const double* W = P + layout_.head_w;
    double l0 = P[layout_.head_b];
    double l1 = P[layout_.head_b + 1];
    for (int j = 0; j < d; ++j) {
      l0 += cache->cls_out[j] * W[static_cast<std::size_t>(j) * 2];
      l1 += cache->cls_out[j] * W[static_cast<std::size_t>(j) * 2 + 1];
    }
    cache->logits[0] = l0;
    cache->logits[1] = l1;
    double m = std::max(l0, l1);
    double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    cache->p1 = e1 / (e0 + e1);
    return cache->p1;
  }

  void run_backward(const std::vector<int>& ids, int gold, double weight,
                    const Cache& cache) {
    const int T = cache.T;
    const int d = spec_.dim;
    const int H = spec_.heads;
    const int dk = d / H;
    const int f = spec_.ffn;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    const double* P = params_.data();
    double* G = grads_.data();

    // Softmax cross-entropy at the head.
    double dlogits[2];
    dlogits[0] = (1.0 - cache.p1) - (gold == 0 ? 1.0 : 0.0);
    dlogits[1] = cache.p1 - (gold == 1 ? 1.0 : 0.0);
    dlogits[0] *= weight;
    dlogits[1] *= weight;

    std::vector<double> dcls_out(d, 0.0);
    const double* W = P + layout_.head_w;
    for (int j = 0; j < d; ++j) {
      G[layout_.head_w + static_cast<std::size_t>(j) * 2] += cache.cls_out[j] * dlogits[0];
      G[layout_.head_w + static_cast<std::size_t>(j) * 2 + 1] += cache.cls_out[j] * dlogits[1];
      dcls_out[j] = W[static_cast<std::size_t>(j) * 2] * dlogits[0] +
                    W[static_cast<std::size_t>(j) * 2 + 1] * dlogits[1];
    }
    G[layout_.head_b] += dlogits[0];
    G[layout_.head_b + 1] += dlogits[1];

    // Through the final LN into row 0 of the last hidden state.
    std::vector<double> dx(static_cast<std::size_t>(T) * d, 0.0);
    ln_backward(dcls_out.data(), cache.cls_hat.data(), &cache.cls_rstd,
                P + layout_.lnf_g, dx.data(), G + layout_.lnf_g, G + layout_.lnf_b, 1, d);

    for (int l = spec_.layers - 1; l >= 0; --l) {
      const auto& L = layout_.layers[l];
      const auto& C = cache.layers[l];
      const std::size_t Td = static_cast<std::size_t>(T) * d;

      // FFN block: x_out = x_mid + g(u2 W1 + b1) W2 + b2
      std::vector<double> dg(static_cast<std::size_t>(T) * f, 0.0);
      matmul_nt(dx.data(), P + L.w2, dg.data(), T, d, f);
      matmul_tn(C.g.data(), dx.data(), G + L.w2, T, f, d);
      for (int t = 0; t < T; ++t) {
        const double* dxr = dx.data() + static_cast<std::size_t>(t) * d;
        for (int j = 0; j < d; ++j) G[L.b2 + j] += dxr[j];
      }
      std::vector<double> dh1(static_cast<std::size_t>(T) * f);
      for (std::size_t i = 0; i < dh1.size(); ++i) dh1[i] = dg[i] * gelu_grad(C.h1[i]);
      std::vector<double> du2(Td, 0.0);
      matmul_nt(dh1.data(), P + L.w1, du2.data(), T, f, d);
      matmul_tn(C.u2.data(), dh1.data(), G + L.w1, T, d, f);
      for (int t = 0; t < T; ++t) {
        const double* r = dh1.data() + static_cast<std::size_t>(t) * f;
        for (int j = 0; j < f; ++j) G[L.b1 + j] += r[j];
      }
      // residual: dx flows through both branches
      ln_backward(du2.data(), C.u2_hat.data(), C.u2_rstd.data(), P + L.ln2_g, dx.data(),
                  G + L.ln2_g, G + L.ln2_b, T, d);

      // Attention block: x_mid = x_in + ctx Wo + bo
      std::vector<double> dctx(Td, 0.0);
      matmul_nt(dx.data(), P + L.wo, dctx.data(), T, d, d);
      matmul_tn(C.ctx.data(), dx.data(), G + L.wo, T, d, d);
      for (int t = 0; t < T; ++t) {
        const double* dxr = dx.data() + static_cast<std::size_t>(t) * d;
        for (int j = 0; j < d; ++j) G[L.bo + j] += dxr[j];
      }

      std::vector<double> dq(Td, 0.0), dkv(Td, 0.0), dv(Td, 0.0);
      std::vector<double> dprob(T), ds(T);
      for (int h = 0; h < H; ++h) {
        const int hoff = h * dk;
        for (int i = 0; i < T; ++i) {
          const double* probs =
              C.probs.data() + (static_cast<std::size_t>(h) * T + i) * T;
          const double* dctxi = dctx.data() + static_cast<std::size_t>(i) * d + hoff;
          double dot = 0.0;
          for (int j = 0; j < T; ++j) {
            const double* vj = C.v.data() + static_cast<std::size_t>(j) * d + hoff;
            double s = 0.0;
            for (int c = 0; c < dk; ++c) s += dctxi[c] * vj[c];
            dprob[j] = s;
            dot += s * probs[j];
            double* dvj = dv.data() + static_cast<std::size_t>(j) * d + hoff;
            for (int c = 0; c < dk; ++c) dvj[c] += probs[j] * dctxi[c];
          }
          for (int j = 0; j < T; ++j) ds[j] = probs[j] * (dprob[j] - dot) * scale;
          double* dqi = dq.data() + static_cast<std::size_t>(i) * d + hoff;
          const double* qi = C.q.data() + static_cast<std::size_t>(i) * d + hoff;
          for (int j = 0; j < T; ++j) {
            const double* kj = C.k.data() + static_cast<std::size_t>(j) * d + hoff;
            double* dkj = dkv.data() + static_cast<std::size_t>(j) * d + hoff;
            for (int c = 0; c < dk; ++c) {
              dqi[c] += ds[j] * kj[c];
              dkj[c] += ds[j] * qi[c];
            }
          }
        }
      }

      std::vector<double> du(Td, 0.0);
      matmul_nt(dq.data(), P + L.wq, du.data(), T, d, d);
      matmul_nt(dkv.data(), P + L.wk, du.data(), T, d, d);
      matmul_nt(dv.data(), P + L.wv, du.data(), T, d, d);
      matmul_tn(C.u.data(), dq.data(), G + L.wq, T, d, d);
      matmul_tn(C.u.data(), dkv.data(), G + L.wk, T, d, d);
      matmul_tn(C.u.data(), dv.data(), G + L.wv, T, d, d);
      for (int t = 0; t < T; ++t) {
        const double* rq = dq.data() + static_cast<std::size_t>(t) * d;
        const double* rk = dkv.data() + static_cast<std::size_t>(t) * d;
        const double* rv = dv.data() + static_cast<std::size_t>(t) * d;
        for (int j = 0; j < d; ++j) {
          G[L.bq + j] += rq[j];
          G[L.bk + j] += rk[j];
          G[L.bv + j] += rv[j];
        }
      }
      ln_backward(du.data(), C.u_hat.data(), C.u_rstd.data(), P + L.ln1_g, dx.data(),
                  G + L.ln1_g, G + L.ln1_b, T, d);
    }

    // Embedding gradients.
    for (int t = 0; t < T; ++t) {
      const double* r = dx.data() + static_cast<std::size_t>(t) * d;
      double* gt = G + layout_.tok_emb + static_cast<std::size_t>(ids[t]) * d;
      double* gp = G + layout_.pos_emb + static_cast<std::size_t>(t) * d;
      for (int j = 0; j < d; ++j) {
        gt[j] += r[j];
        gp[j] += r[j];
      }
    }
  }

  CompactEncoderSpec spec_;
  Layout layout_;
  std::vector<double> params_;
  std::vector<double> grads_;
};

// ---------------------------------------------------------------------------
// Serialization

namespace {
constexpr char kModelMagic[9] = "SEMPLM01";

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("model file: unexpected end of file");
  return v;
}
}  // namespace

void CompactModel::serialize(std::ostream& out) const {
  out.write(kModelMagic, 8);
  write_pod<std::int32_t>(out, spec_.dim);
  write_pod<std::int32_t>(out, spec_.layers);
  write_pod<std::int32_t>(out, spec_.heads);
  write_pod<std::int32_t>(out, spec_.ffn);
  write_pod<std::int32_t>(out, spec_.vocab_buckets);
  write_pod<std::int32_t>(out, spec_.max_positions);
  write_pod<std::uint64_t>(out, params_.size());
  out.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(params_.size() * sizeof(double)));
}

std::unique_ptr<CompactModel> CompactModel::deserialize(std::istream& in,
                                                        std::string* encoder_id) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kModelMagic, 8) != 0)
    throw DataError("model file: bad magic");
  CompactEncoderSpec spec;
  spec.dim = read_pod<std::int32_t>(in);
  spec.layers = read_pod<std::int32_t>(in);
  spec.heads = read_pod<std::int32_t>(in);
  spec.ffn = read_pod<std::int32_t>(in);
  spec.vocab_buckets = read_pod<std::int32_t>(in);
  spec.max_positions = read_pod<std::int32_t>(in);
  auto count = read_pod<std::uint64_t>(in);
  auto model = std::make_unique<CompactModel>(spec, "compact");
  if (count != model->params_.size())
    throw DataError("model file: parameter count mismatch");
  in.read(reinterpret_cast<char*>(model->params_.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw DataError("model file: truncated parameters");
  if (encoder_id) *encoder_id = "compact";
  return model;
}

// ---------------------------------------------------------------------------
// Model handle

Model::Model() = default;
Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

bool Model::initialized() const { return impl_ != nullptr; }

const std::string& Model::encoder_id() const { return encoder_id_; }

const CompactEncoderSpec& Model::spec() const {
  if (!impl_) throw UsageError("model not initialized");
  return impl_->spec();
}

int Model::max_sequence_length() const { return max_sequence_length_; }

std::vector<Prediction> Model::predict(const std::vector<PromptRecord>& prompts) const {
  if (!impl_) throw UsageError("model not initialized");
  MarkerTokenizer tokenizer(impl_->spec().vocab_buckets);
  const int max_len = std::min(max_sequence_length_, impl_->spec().max_positions);
  std::vector<Prediction> out;
  out.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    bool truncated = false;
    std::vector<int> ids;
    try {
      ids = tokenizer.encode(prompts[i].prompt, max_len, &truncated);
    } catch (const DataError& e) {
      throw DataError("prompt " + std::to_string(i) + ": " + e.what());
    }
    double p1 = impl_->forward(ids);
    Prediction p;
    p.score = p1;
    p.label = p1 >= 0.5 ? 1 : 0;
    p.truncated = truncated;
    out.push_back(p);
  }
  return out;
}

void Model::save(const std::string& path) const {
  if (!impl_) throw UsageError("model not initialized");
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw EnvError("cannot write model: " + path);
    impl_->serialize(out);
    write_pod<std::int32_t>(out, max_sequence_length_);
    std::uint32_t len = static_cast<std::uint32_t>(encoder_id_.size());
    write_pod(out, len);
    out.write(encoder_id_.data(), len);
    if (!out) throw EnvError("short write: " + path);
  }
  fs::rename(tmp, target);
}

Model Model::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open model: " + path);
  Model m;
  m.impl_ = CompactModel::deserialize(in, nullptr);
  m.max_sequence_length_ = read_pod<std::int32_t>(in);
  auto len = read_pod<std::uint32_t>(in);
  m.encoder_id_.resize(len);
  in.read(m.encoder_id_.data(), len);
  if (!in) throw DataError("model file: truncated trailer");
  return m;
}

// ---------------------------------------------------------------------------
// AdamW with linear warmup then constant rate.

namespace {

class AdamW {
 public:
  AdamW(std::size_t n, double lr, double weight_decay, int warmup_steps)
      : lr_(lr), wd_(weight_decay), warmup_(warmup_steps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grads) {
    ++t_;
    const double lr_t =
        warmup_ > 0 ? lr_ * std::min(1.0, static_cast<double>(t_) / warmup_) : lr_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      double g = grads[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
      double mhat = m_[i] / bc1;
      double vhat = v_[i] / bc2;
      // decoupled weight decay
      params[i] -= lr_t * (mhat / (std::sqrt(vhat) + eps_) + wd_ * params[i]);
    }
  }

 private:
  double lr_, wd_;
  int warmup_;
  long t_ = 0;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::vector<double> m_, v_;
};

}  // namespace

struct FineTuner {
  static std::vector<double>& params(Model& m) { return m.impl_->params(); }

  static std::vector<double> loss_gradients(Model& m, const std::string& prompt,
                                            int gold, double* loss) {
    MarkerTokenizer tokenizer(m.impl_->spec().vocab_buckets);
    bool truncated = false;
    auto ids = tokenizer.encode(
        prompt, std::min(m.max_sequence_length_, m.impl_->spec().max_positions),
        &truncated);
    m.impl_->zero_grads();
    double l = m.impl_->forward_backward(ids, gold, 1.0);
    if (loss) *loss = l;
    return m.impl_->grads();
  }

  static FineTuneResult run(const std::vector<PromptRecord>& train,
                            const std::vector<PromptRecord>& dev,
                            const TrainConfig& config) {
    config.validate();
    if (train.empty()) throw DataError("fine_tune: empty training set");
    bool has0 = false, has1 = false;
    for (const auto& r : train) {
      (r.label == 1 ? has1 : has0) = true;
    }
    if (!has0 || !has1)
      throw DataError("fine_tune: degenerate training set (single label)");

    CompactEncoderSpec spec = parse_encoder_id(config.encoder_id);
    const int max_len = std::min(config.max_sequence_length, spec.max_positions);
    MarkerTokenizer tokenizer(spec.vocab_buckets);

    TrainingLog log;
    auto encode_all = [&](const std::vector<PromptRecord>& records, const char* which,
                          std::size_t* truncated_count) {
      std::vector<std::vector<int>> ids(records.size());
      for (std::size_t i = 0; i < records.size(); ++i) {
        bool truncated = false;
        try {
          ids[i] = tokenizer.encode(records[i].prompt, max_len, &truncated);
        } catch (const DataError& e) {
          throw DataError(std::string(which) + " record " + std::to_string(i) + " (" +
                          to_string(records[i].dataset) + "/" +
                          to_string(records[i].split) + "): " + e.what());
        }
        if (truncated) ++*truncated_count;
      }
      return ids;
    };
    auto train_ids = encode_all(train, "train", &log.truncated_train);
    encode_all(dev, "dev", &log.truncated_dev);

    Model model;
    model.impl_ = std::make_unique<CompactModel>(spec, config.encoder_id);
    model.impl_->init_head(config.seed);
    model.encoder_id_ = config.encoder_id;
    model.max_sequence_length_ = max_len;

    AdamW opt(model.impl_->params().size(), config.learning_rate, config.weight_decay,
              config.warmup_steps);
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, "epoch-shuffle"));

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      deterministic_shuffle(order, shuffle_rng);
      double loss_sum = 0.0;
      for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
        std::size_t batch_end = std::min(order.size(), b + config.batch_size);
        const double weight = 1.0 / static_cast<double>(batch_end - b);
        model.impl_->zero_grads();
        for (std::size_t i = b; i < batch_end; ++i) {
          std::size_t idx = order[i];
          loss_sum += model.impl_->forward_backward(train_ids[idx],
                                                    train[idx].label, weight);
        }
        opt.step(model.impl_->params(), model.impl_->grads());
      }

      EpochLog entry;
      entry.epoch = epoch;
      entry.train_loss = loss_sum / static_cast<double>(train.size());
      std::size_t correct = 0;
      for (std::size_t i = 0; i < train.size(); ++i) {
        double p1 = model.impl_->forward(train_ids[i]);
        if ((p1 >= 0.5 ? 1 : 0) == train[i].label) ++correct;
      }
      entry.train_accuracy = static_cast<double>(correct) / train.size();
      if (!dev.empty()) {
        auto dev_preds = model.predict(dev);
        std::vector<int> golds;
        golds.reserve(dev.size());
        for (const auto& r : dev) golds.push_back(r.label);
        entry.dev = compute_metrics(dev_preds, golds);
      }
      log.epochs.push_back(std::move(entry));
    }

    FineTuneResult result;
    result.model = std::move(model);
    result.log = std::move(log);
    return result;
  }
};

FineTuneResult fine_tune(const std::vector<PromptRecord>& train,
                         const std::vector<PromptRecord>& dev, const TrainConfig& config) {
  return FineTuner::run(train, dev, config);
}

std::vector<Prediction> predict_batch(const Model& model,
                                      const std::vector<PromptRecord>& prompts) {
  return model.predict(prompts);
}

Model zero_shot_init(const TrainConfig& config) {
  config.validate();
  CompactEncoderSpec spec = parse_encoder_id(config.encoder_id);
  Model model;
  model.impl_ = std::make_unique<CompactModel>(spec, config.encoder_id);
  model.impl_->init_head(config.seed);
  model.encoder_id_ = config.encoder_id;
  model.max_sequence_length_ = std::min(config.max_sequence_length, spec.max_positions);
  return model;
}

// ---------------------------------------------------------------------------
// Run directory

json train_config_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"weight_decay", c.weight_decay},
              {"warmup_steps", c.warmup_steps},
              {"seed", c.seed},
              {"max_sequence_length", c.max_sequence_length},
              {"encoder_id", c.encoder_id}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.seed = j.value("seed", c.seed);
  c.max_sequence_length = j.value("max_sequence_length", c.max_sequence_length);
  c.encoder_id = j.value("encoder_id", c.encoder_id);
  return c;
}

namespace {

json epoch_log_to_json(const EpochLog& e) {
  json j{{"epoch", e.epoch},
         {"train_loss", e.train_loss},
         {"train_accuracy", e.train_accuracy}};
  j["dev"] = e.dev ? metrics_to_json(*e.dev) : json(nullptr);
  return j;
}

}  // namespace

std::string write_run(const std::string& run_root, const Model& model,
                      const TrainingLog& log, const TrainConfig& config, PromptMode mode,
                      const std::vector<DataFingerprint>& data) {
  json core;
  core["config"] = train_config_to_json(config);
  core["mode"] = to_string(mode);
  core["data"] = json::array();
  for (const auto& d : data)
    core["data"].push_back(
        {{"path", d.path}, {"sha256", d.sha256}, {"records", d.records}});

  std::string hash = sha256_hex(core.dump());
  namespace fs = std::filesystem;
  fs::path run_dir = fs::path(run_root) / ("run-" + hash.substr(0, 16));
  fs::create_directories(run_dir);

  json manifest = core;
  manifest["manifest_hash"] = hash;
  manifest["markers_atomic"] = true;  // bracket markers are single vocabulary ids
  manifest["truncated"] = {{"train", log.truncated_train}, {"dev", log.truncated_dev}};
  manifest["epochs"] = json::array();
  for (const auto& e : log.epochs) manifest["epochs"].push_back(epoch_log_to_json(e));
  manifest["model_file"] = "model.bin";

  model.save((run_dir / "model.bin").string());
  atomic_write_file((run_dir / "manifest.json").string(), manifest.dump(2) + "\n");
  return run_dir.string();
}

namespace detail {

std::vector<double>& model_params(Model& m) {
  if (!m.initialized()) throw UsageError("model not initialized");
  return FineTuner::params(m);
}

std::vector<double> loss_gradients(Model& m, const std::string& prompt, int gold,
                                   double* loss) {
  if (!m.initialized()) throw UsageError("model not initialized");
  return FineTuner::loss_gradients(m, prompt, gold, loss);
}

}  // namespace detail

LoadedRun load_run(const std::string& manifest_path) {
  json manifest = json::parse(read_file(manifest_path), nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object())
    throw DataError("bad run manifest: " + manifest_path);
  LoadedRun run;
  run.manifest = manifest;
  run.config = train_config_from_json(manifest.value("config", json::object()));
  run.mode = mode_from_string(manifest.value("mode", "baseline"));
  namespace fs = std::filesystem;
  fs::path dir = fs::path(manifest_path).parent_path();
  run.model = Model::load((dir / manifest.value("model_file", "model.bin")).string());
  return run;
}

}  // namespace sempl
