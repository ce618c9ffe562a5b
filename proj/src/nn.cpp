#include "floff/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace floff {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// logsumexp-based softmax cross entropy; returns loss, fills probs
double softmax_ce(std::span<const double> logits, int label, std::vector<double>& probs) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0;
  probs.resize(logits.size());
  for (size_t i = 0; i < logits.size(); i++) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  double lse = mx + std::log(sum);
  return lse - logits[label];
}

struct MlpView {
  std::vector<const Tensor*> W, b;
  size_t layer_count() const { return W.size(); }
};

MlpView mlp_view(const ModelWeights& w) {
  MlpView v;
  for (size_t i = 0; i + 1 < w.spec.dims.size(); i++) {
    bool last = i + 2 == w.spec.dims.size();
    std::string base = last ? "out" : "dense" + std::to_string(i);
    v.W.push_back(&w.tensor(base + ".W"));
    v.b.push_back(&w.tensor(base + ".b"));
  }
  return v;
}

struct MlpCache {
  std::vector<std::vector<double>> act;  // act[0] = input, act[l+1] = layer l output
};

std::vector<double> mlp_logits(const ModelWeights& w, std::span<const double> x, MlpCache* cache) {
  MlpView v = mlp_view(w);
  std::vector<double> cur(x.begin(), x.end());
  if (cache) cache->act.assign(1, cur);
  for (size_t l = 0; l < v.layer_count(); l++) {
    const auto& W = *v.W[l];
    const auto& b = *v.b[l];
    size_t in = W.shape[0], out = W.shape[1];
    std::vector<double> next(out);
    for (size_t j = 0; j < out; j++) {
      double s = b.values[j];
      for (size_t i = 0; i < in; i++) s += cur[i] * W.values[i * out + j];
      next[j] = s;
    }
    if (l + 1 < v.layer_count())
      for (double& z : next) z = z > 0 ? z : 0;
    cur = std::move(next);
    if (cache) cache->act.push_back(cur);
  }
  return cur;
}

struct LstmView {
  const Tensor *Wx, *Wh, *b, *headW, *headb, *nmin, *nscale;
  size_t D, H, T, C;
};

LstmView lstm_view(const ModelWeights& w) {
  LstmView v;
  v.Wx = &w.tensor("lstm.Wx");
  v.Wh = &w.tensor("lstm.Wh");
  v.b = &w.tensor("lstm.b");
  v.headW = &w.tensor("head.W");
  v.headb = &w.tensor("head.b");
  v.nmin = &w.tensor("norm.min");
  v.nscale = &w.tensor("norm.scale");
  v.D = w.spec.dims[0];
  v.H = w.spec.dims[1];
  v.T = w.spec.dims[2];
  v.C = w.spec.dims[3];
  return v;
}

struct LstmCache {
  // per step: normalized input, gates (i f g o), cell, tanh(cell), hidden
  std::vector<std::vector<double>> xs, gates, cs, hcs, hs;
};

std::vector<double> lstm_logits(const ModelWeights& w, std::span<const double> x,
                                LstmCache* cache) {
  LstmView v = lstm_view(w);
  size_t D = v.D, H = v.H, T = v.T;
  std::vector<double> h(H, 0.0), c(H, 0.0);
  std::vector<double> xt(D), a(4 * H);
  for (size_t t = 0; t < T; t++) {
    for (size_t d = 0; d < D; d++)
      xt[d] = (x[t * D + d] - v.nmin->values[d]) * v.nscale->values[d];
    for (size_t j = 0; j < 4 * H; j++) a[j] = v.b->values[j];
    for (size_t d = 0; d < D; d++) {
      double xv = xt[d];
      if (xv == 0) continue;
      const double* row = v.Wx->values.data() + d * 4 * H;
      for (size_t j = 0; j < 4 * H; j++) a[j] += xv * row[j];
    }
    for (size_t k = 0; k < H; k++) {
      double hv = h[k];
      if (hv == 0) continue;
      const double* row = v.Wh->values.data() + k * 4 * H;
      for (size_t j = 0; j < 4 * H; j++) a[j] += hv * row[j];
    }
    std::vector<double> g(4 * H);
    for (size_t k = 0; k < H; k++) {
      g[k] = sigmoid(a[k]);                  // input gate
      g[H + k] = sigmoid(a[H + k]);          // forget gate
      g[2 * H + k] = std::tanh(a[2 * H + k]);  // candidate
      g[3 * H + k] = sigmoid(a[3 * H + k]);  // output gate
    }
    std::vector<double> c_new(H), hc(H), h_new(H);
    for (size_t k = 0; k < H; k++) {
      c_new[k] = g[H + k] * c[k] + g[k] * g[2 * H + k];
      hc[k] = std::tanh(c_new[k]);
      h_new[k] = g[3 * H + k] * hc[k];
    }
    if (cache) {
      cache->xs.push_back(xt);
      cache->gates.push_back(g);
      cache->cs.push_back(c_new);
      cache->hcs.push_back(hc);
      cache->hs.push_back(h_new);
    }
    c = std::move(c_new);
    h = std::move(h_new);
  }
  std::vector<double> logits(v.C);
  for (size_t cc = 0; cc < v.C; cc++) {
    double s = v.headb->values[cc];
    for (size_t k = 0; k < H; k++) s += h[k] * v.headW->values[k * v.C + cc];
    logits[cc] = s;
  }
  return logits;
}

std::vector<double> logits_of(const ModelWeights& w, std::span<const double> x) {
  return w.spec.arch == Arch::MLP ? mlp_logits(w, x, nullptr) : lstm_logits(w, x, nullptr);
}

bool trainable(const Tensor& t) { return t.name.rfind("norm.", 0) != 0; }

// gradients parallel to w.layers (zeros for non-trainable tensors)
using Grads = std::vector<std::vector<double>>;

Grads zero_grads(const ModelWeights& w) {
  Grads g(w.layers.size());
  for (size_t i = 0; i < w.layers.size(); i++) g[i].assign(w.layers[i].values.size(), 0.0);
  return g;
}

size_t layer_index(const ModelWeights& w, const std::string& name) {
  for (size_t i = 0; i < w.layers.size(); i++)
    if (w.layers[i].name == name) return i;
  throw Error(Err::invalid_argument, "no tensor named " + name);
}

void mlp_backward(const ModelWeights& w, const MlpCache& cache, std::span<const double> dlogits,
                  Grads& grads) {
  MlpView v = mlp_view(w);
  std::vector<double> d(dlogits.begin(), dlogits.end());
  for (size_t l = v.layer_count(); l-- > 0;) {
    const auto& W = *v.W[l];
    size_t in = W.shape[0], out = W.shape[1];
    size_t wi = layer_index(w, W.name);
    size_t bi = wi + 1;  // bias follows its weight in the layer list
    const auto& a = cache.act[l];
    for (size_t i = 0; i < in; i++) {
      double av = a[i];
      if (av != 0)
        for (size_t j = 0; j < out; j++) grads[wi][i * out + j] += av * d[j];
    }
    for (size_t j = 0; j < out; j++) grads[bi][j] += d[j];
    if (l > 0) {
      std::vector<double> dprev(in, 0.0);
      for (size_t i = 0; i < in; i++) {
        double s = 0;
        for (size_t j = 0; j < out; j++) s += W.values[i * out + j] * d[j];
        dprev[i] = cache.act[l][i] > 0 ? s : 0;  // relu'
      }
      d = std::move(dprev);
    }
  }
}

void lstm_backward(const ModelWeights& w, const LstmCache& cache, std::span<const double> dlogits,
                   Grads& grads) {
  LstmView v = lstm_view(w);
  size_t D = v.D, H = v.H, T = v.T, C = v.C;
  size_t iWx = layer_index(w, "lstm.Wx"), iWh = layer_index(w, "lstm.Wh"),
         ib = layer_index(w, "lstm.b"), iHW = layer_index(w, "head.W"),
         iHb = layer_index(w, "head.b");

  const auto& hT = cache.hs[T - 1];
  std::vector<double> dh(H, 0.0);
  for (size_t k = 0; k < H; k++) {
    double s = 0;
    for (size_t c = 0; c < C; c++) {
      grads[iHW][k * C + c] += hT[k] * dlogits[c];
      s += v.headW->values[k * C + c] * dlogits[c];
    }
    dh[k] = s;
  }
  for (size_t c = 0; c < C; c++) grads[iHb][c] += dlogits[c];

  std::vector<double> dc(H, 0.0), da(4 * H);
  const std::vector<double> zeros(H, 0.0);
  for (size_t t = T; t-- > 0;) {
    const auto& g = cache.gates[t];
    const auto& hc = cache.hcs[t];
    const auto& c_prev_v = t > 0 ? cache.cs[t - 1] : zeros;
    for (size_t k = 0; k < H; k++) {
      double ig = g[k], fg = g[H + k], gg = g[2 * H + k], og = g[3 * H + k];
      double d_o = dh[k] * hc[k];
      dc[k] += dh[k] * og * (1 - hc[k] * hc[k]);
      double d_i = dc[k] * gg;
      double d_g = dc[k] * ig;
      double d_f = dc[k] * c_prev_v[k];
      da[k] = d_i * ig * (1 - ig);
      da[H + k] = d_f * fg * (1 - fg);
      da[2 * H + k] = d_g * (1 - gg * gg);
      da[3 * H + k] = d_o * og * (1 - og);
      dc[k] *= fg;  // carries to t-1
    }
    const auto& xt = cache.xs[t];
    for (size_t d = 0; d < D; d++) {
      double xv = xt[d];
      if (xv != 0)
        for (size_t j = 0; j < 4 * H; j++) grads[iWx][d * 4 * H + j] += xv * da[j];
    }
    if (t > 0) {
      const auto& h_prev = cache.hs[t - 1];
      for (size_t k = 0; k < H; k++) {
        double hv = h_prev[k];
        if (hv != 0)
          for (size_t j = 0; j < 4 * H; j++) grads[iWh][k * 4 * H + j] += hv * da[j];
      }
    }
    for (size_t j = 0; j < 4 * H; j++) grads[ib][j] += da[j];
    std::vector<double> dh_prev(H, 0.0);
    for (size_t k = 0; k < H; k++) {
      double s = 0;
      const double* row = v.Wh->values.data() + k * 4 * H;
      for (size_t j = 0; j < 4 * H; j++) s += row[j] * da[j];
      dh_prev[k] = s;
    }
    dh = std::move(dh_prev);
  }
}

void validate_examples(const ModelWeights& w, const Examples& ex, const char* what) {
  if (ex.count() == 0) throw Error(Err::invalid_argument, std::string(what) + ": empty set");
  if (ex.width != w.spec.example_width())
    throw Error(Err::invalid_argument, std::string(what) + ": feature width mismatch");
  if (ex.classes != w.spec.num_classes())
    throw Error(Err::invalid_argument, std::string(what) + ": class count mismatch");
  for (int label : ex.y)
    if (label < 0 || size_t(label) >= ex.classes)
      throw Error(Err::invalid_argument, std::string(what) + ": label out of range");
  for (double v : ex.x)
    if (!std::isfinite(v))
      throw Error(Err::invalid_argument, std::string(what) + ": non-finite feature");
}

// mean loss over batch rows, accumulating gradients if grads != nullptr
double batch_pass(const ModelWeights& w, const Examples& ex, std::span<const size_t> rows,
                  Grads* grads) {
  double total = 0;
  std::vector<double> probs;
  for (size_t r : rows) {
    std::span<const double> x = ex.row(r);
    int label = ex.y[r];
    if (w.spec.arch == Arch::MLP) {
      MlpCache cache;
      std::vector<double> logits = mlp_logits(w, x, grads ? &cache : nullptr);
      total += softmax_ce(logits, label, probs);
      if (grads) {
        std::vector<double> dl = probs;
        dl[label] -= 1.0;
        for (double& d : dl) d /= double(rows.size());
        mlp_backward(w, cache, dl, *grads);
      }
    } else {
      LstmCache cache;
      std::vector<double> logits = lstm_logits(w, x, grads ? &cache : nullptr);
      total += softmax_ce(logits, label, probs);
      if (grads) {
        std::vector<double> dl = probs;
        dl[label] -= 1.0;
        for (double& d : dl) d /= double(rows.size());
        lstm_backward(w, cache, dl, *grads);
      }
    }
  }
  return total / double(rows.size());
}

void set_norm_stats(ModelWeights& w, const Examples& ex) {
  auto& scale = w.tensor("norm.scale");
  for (double v : scale.values)
    if (v != 0) return;  // stats already present
  auto& nmin = w.tensor("norm.min");
  size_t D = w.spec.dims[0], T = w.spec.dims[2];
  std::vector<double> lo(D, std::numeric_limits<double>::infinity());
  std::vector<double> hi(D, -std::numeric_limits<double>::infinity());
  for (size_t r = 0; r < ex.count(); r++) {
    std::span<const double> x = ex.row(r);
    for (size_t t = 0; t < T; t++)
      for (size_t d = 0; d < D; d++) {
        lo[d] = std::min(lo[d], x[t * D + d]);
        hi[d] = std::max(hi[d], x[t * D + d]);
      }
  }
  for (size_t d = 0; d < D; d++) {
    nmin.values[d] = lo[d];
    scale.values[d] = hi[d] > lo[d] ? 1.0 / (hi[d] - lo[d]) : 0.0;
  }
}

}  // namespace

int argmax_class(std::span<const double> probs) {
  int best = 0;
  for (size_t i = 1; i < probs.size(); i++)
    if (probs[i] > probs[best]) best = int(i);
  return best;
}

std::vector<double> forward_probs(const ModelWeights& w, std::span<const double> input) {
  if (input.size() != w.spec.example_width())
    throw Error(Err::invalid_argument, "forward: input width mismatch");
  for (double v : input)
    if (!std::isfinite(v)) throw Error(Err::invalid_argument, "forward: non-finite input");
  std::vector<double> logits = logits_of(w, input);
  std::vector<double> probs;
  softmax_ce(logits, 0, probs);
  return probs;
}

Metrics metrics_from_confusion(const std::vector<std::vector<uint64_t>>& confusion, double loss) {
  Metrics m;
  m.confusion = confusion;
  m.loss = loss;
  size_t C = confusion.size();
  uint64_t total = 0, correct = 0;
  for (size_t a = 0; a < C; a++)
    for (size_t p = 0; p < C; p++) {
      total += confusion[a][p];
      if (a == p) correct += confusion[a][p];
    }
  m.accuracy = total ? double(correct) / double(total) : 0.0;
  double psum = 0, rsum = 0, fsum = 0;
  for (size_t c = 0; c < C; c++) {
    uint64_t col = 0, row = 0;
    for (size_t k = 0; k < C; k++) {
      col += confusion[k][c];
      row += confusion[c][k];
    }
    double prec = col ? double(confusion[c][c]) / double(col) : 0.0;
    double rec = row ? double(confusion[c][c]) / double(row) : 0.0;
    double f1 = (prec + rec) > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    psum += prec;
    rsum += rec;
    fsum += f1;
  }
  m.precision = C ? psum / double(C) : 0.0;
  m.recall = C ? rsum / double(C) : 0.0;
  m.f1 = C ? fsum / double(C) : 0.0;
  return m;
}

Metrics evaluate(const ModelWeights& w, const Examples& test_set) {
  validate_examples(w, test_set, "evaluate");
  size_t C = w.spec.num_classes();
  std::vector<std::vector<uint64_t>> confusion(C, std::vector<uint64_t>(C, 0));
  double loss = 0;
  std::vector<double> probs;
  for (size_t r = 0; r < test_set.count(); r++) {
    std::vector<double> logits = logits_of(w, test_set.row(r));
    loss += softmax_ce(logits, test_set.y[r], probs);
    confusion[size_t(test_set.y[r])][size_t(argmax_class(probs))]++;
  }
  return metrics_from_confusion(confusion, loss / double(test_set.count()));
}

TrainResult train(const ModelWeights& start, const Examples& train_set, const TrainConfig& cfg) {
  validate_examples(start, train_set, "train");
  if (cfg.batch_size == 0) throw Error(Err::invalid_argument, "train: batch size is zero");

  ModelWeights w = start;
  if (w.spec.arch == Arch::LSTM) set_norm_stats(w, train_set);

  // fresh optimizer state per call
  Grads m_state = zero_grads(w), v_state = zero_grads(w);
  uint64_t step = 0;
  Rng rng(cfg.seed);
  size_t n = train_set.count();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; i++) order[i] = i;

  for (uint64_t epoch = 0; epoch < cfg.epochs; epoch++) {
    rng.shuffle(order);
    for (size_t off = 0; off < n; off += cfg.batch_size) {
      size_t len = std::min<size_t>(cfg.batch_size, n - off);
      std::span<const size_t> rows(order.data() + off, len);
      Grads grads = zero_grads(w);
      double loss = batch_pass(w, train_set, rows, &grads);
      if (!std::isfinite(loss)) throw Error(Err::diverged, "training diverged: non-finite loss");
      step++;
      for (size_t li = 0; li < w.layers.size(); li++) {
        if (!trainable(w.layers[li])) continue;
        auto& vals = w.layers[li].values;
        auto& g = grads[li];
        if (cfg.optimizer == Optimizer::SGD) {
          if (cfg.learning_rate != 0)
            for (size_t k = 0; k < vals.size(); k++) vals[k] -= cfg.learning_rate * g[k];
        } else {
          auto& m = m_state[li];
          auto& v = v_state[li];
          double bc1 = 1.0 - std::pow(cfg.adam_beta1, double(step));
          double bc2 = 1.0 - std::pow(cfg.adam_beta2, double(step));
          for (size_t k = 0; k < vals.size(); k++) {
            m[k] = cfg.adam_beta1 * m[k] + (1 - cfg.adam_beta1) * g[k];
            v[k] = cfg.adam_beta2 * v[k] + (1 - cfg.adam_beta2) * g[k] * g[k];
            if (cfg.learning_rate != 0) {
              double mh = m[k] / bc1, vh = v[k] / bc2;
              vals[k] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_eps);
            }
          }
        }
      }
    }
  }
  w.quantize_f32();
  TrainResult out{std::move(w), {}};
  out.metrics = evaluate(out.weights, train_set);
  return out;
}

double gradient_check(const ModelWeights& w0, const Examples& batch, double fd_step) {
  validate_examples(w0, batch, "gradient_check");
  ModelWeights w = w0;
  std::vector<size_t> rows(batch.count());
  for (size_t i = 0; i < rows.size(); i++) rows[i] = i;

  Grads analytic = zero_grads(w);
  batch_pass(w, batch, rows, &analytic);

  double worst = 0;
  for (size_t li = 0; li < w.layers.size(); li++) {
    if (!trainable(w.layers[li])) continue;
    auto& vals = w.layers[li].values;
    for (size_t k = 0; k < vals.size(); k++) {
      double saved = vals[k];
      vals[k] = saved + fd_step;
      double lp = batch_pass(w, batch, rows, nullptr);
      vals[k] = saved - fd_step;
      double lm = batch_pass(w, batch, rows, nullptr);
      vals[k] = saved;
      double gn = (lp - lm) / (2 * fd_step);
      double ga = analytic[li][k];
      // The absolute floor must sit above the finite-difference measurement
      // noise (~ulp(loss)/step, about 1e-10 here), or parameters with a true
      // zero gradient — e.g. relu units dark on the whole batch — would be
      // compared against pure rounding noise.
      double rel = std::abs(ga - gn) / std::max(1e-6, std::abs(ga) + std::abs(gn));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace floff
