#pragma once

// Templated network internals shared by the double-precision public API and
// the float training path. Backprop is hand-written per layer; the max-pool
// backward touches only the argmax columns, so the point-branch backward
// costs a small fraction of its forward.

#include <algorithm>
#include <cmath>
#include <vector>

#include "contactservo/model.hpp"

namespace contactservo::detail {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum Layer : int {
  kPt1, kPt2, kPt3, kPtProj,
  kWr1, kWr2, kWr3,
  kAEmb, kDyn1, kDyn2, kDyn3,
  kOff1, kOff2, kOff3,
  kBin1, kBin2,
  kLine1, kLine2, kLine3,
  kDecW1, kDecW2, kDecW3,
  kLayerCount
};

struct LayerDef {
  int in = 0, out = 0;
  long w_off = -1, b_off = -1;
  bool present = false;
};

struct LayerTable {
  std::array<LayerDef, kLayerCount> defs;
  long total = 0;
};

inline LayerTable build_layer_table(const ModelConfig& cfg) {
  LayerTable t;
  auto add = [&](int id, int in, int out) {
    t.defs[id] = {in, out, t.total, t.total + static_cast<long>(in) * out, true};
    t.total += static_cast<long>(in) * out + out;
  };
  const bool vision_only = cfg.variant == ModelVariant::kVisionOnly;
  add(kPt1, 3, 64);
  add(kPt2, 64, 128);
  add(kPt3, 128, 64);
  add(kPtProj, 64, vision_only ? 128 : 64);
  if (!vision_only) {
    add(kWr1, 24, 64);
    add(kWr2, 64, 64);
    add(kWr3, 64, 64);
  }
  add(kAEmb, 6, 64);
  add(kDyn1, 192, 256);
  add(kDyn2, 256, 128);
  add(kDyn3, 128, 128);
  if (cfg.variant != ModelVariant::kNoOffset) {
    add(kOff1, 192, 128);
    add(kOff2, 128, 64);
    add(kOff3, 64, 6);
  }
  add(kBin1, 128, 64);
  add(kBin2, 64, 1);
  add(kLine1, 128, 128);
  add(kLine2, 128, 64);
  add(kLine3, 64, 6);
  add(kDecW1, 128, 128);
  add(kDecW2, 128, 64);
  add(kDecW3, 64, 6);
  return t;
}

/// Read-only parameter view; theta is owned elsewhere.
template <typename S>
struct Net {
  ModelConfig cfg;
  LayerTable table;
  const S* theta = nullptr;
  VecX<S> h_mean, h_std;

  using WMap = Eigen::Map<const MatX<S>>;
  using BMap = Eigen::Map<const VecX<S>>;
  WMap W(int l) const {
    const LayerDef& d = table.defs[l];
    return WMap(theta + d.w_off, d.out, d.in);
  }
  BMap b(int l) const {
    const LayerDef& d = table.defs[l];
    return BMap(theta + d.b_off, d.out);
  }
};

/// Gradient accumulator with the same flat layout as theta.
template <typename S>
struct Grad {
  VecX<S> g;
  const LayerTable* table = nullptr;

  void reset(const LayerTable& t) {
    table = &t;
    if (g.size() != t.total) g.resize(t.total);
    g.setZero();
  }
  Eigen::Map<MatX<S>> W(int l) {
    const LayerDef& d = table->defs[l];
    return Eigen::Map<MatX<S>>(g.data() + d.w_off, d.out, d.in);
  }
  Eigen::Map<VecX<S>> b(int l) {
    const LayerDef& d = table->defs[l];
    return Eigen::Map<VecX<S>>(g.data() + d.b_off, d.out);
  }
};

template <typename S>
VecX<S> relu_linear(const Net<S>& net, int layer, const VecX<S>& x) {
  return (net.W(layer) * x + net.b(layer)).cwiseMax(S(0));
}

// ---------------------------------------------------------------------------
// Encoder

template <typename S>
struct EncoderCache {
  MatX<S> x0;        // 3 x P
  MatX<S> a1, a2, a3;
  VecX<S> pooled;
  std::vector<int> argmax;
  VecX<S> venc;
  VecX<S> hstd, b1, b2, wenc;
  VecX<S> z;
};

template <typename S>
const VecX<S>& encoder_forward(const Net<S>& net, const MatX<S>& pts,
                               const VecX<S>& h24, EncoderCache<S>& c) {
  c.x0 = pts;
  c.a1 = ((net.W(kPt1) * c.x0).colwise() + net.b(kPt1)).cwiseMax(S(0));
  c.a2 = ((net.W(kPt2) * c.a1).colwise() + net.b(kPt2)).cwiseMax(S(0));
  c.a3 = (net.W(kPt3) * c.a2).colwise() + net.b(kPt3);  // linear before pool

  const int rows = static_cast<int>(c.a3.rows());
  const int cols = static_cast<int>(c.a3.cols());
  c.pooled.resize(rows);
  c.argmax.assign(rows, 0);
  for (int r = 0; r < rows; ++r) {
    S best = c.a3(r, 0);
    int bi = 0;
    for (int j = 1; j < cols; ++j)
      if (c.a3(r, j) > best) {  // strict: first index wins ties
        best = c.a3(r, j);
        bi = j;
      }
    c.pooled[r] = best;
    c.argmax[r] = bi;
  }
  c.venc = net.W(kPtProj) * c.pooled + net.b(kPtProj);

  if (net.cfg.variant == ModelVariant::kVisionOnly) {
    c.z = c.venc;
    return c.z;
  }
  c.hstd = (h24 - net.h_mean).cwiseQuotient(net.h_std);
  c.b1 = relu_linear(net, kWr1, c.hstd);
  c.b2 = relu_linear(net, kWr2, c.b1);
  c.wenc = net.W(kWr3) * c.b2 + net.b(kWr3);
  c.z.resize(128);
  c.z << c.venc, c.wenc;
  return c.z;
}

template <typename S>
void encoder_backward(const Net<S>& net, const EncoderCache<S>& c,
                      const VecX<S>& dz, Grad<S>& g) {
  VecX<S> dvenc, dwenc;
  if (net.cfg.variant == ModelVariant::kVisionOnly) {
    dvenc = dz;
  } else {
    dvenc = dz.head(64);
    dwenc = dz.tail(64);
    g.W(kWr3).noalias() += dwenc * c.b2.transpose();
    g.b(kWr3) += dwenc;
    VecX<S> db2 = net.W(kWr3).transpose() * dwenc;
    db2 = db2.array() * (c.b2.array() > S(0)).template cast<S>();
    g.W(kWr2).noalias() += db2 * c.b1.transpose();
    g.b(kWr2) += db2;
    VecX<S> db1 = net.W(kWr2).transpose() * db2;
    db1 = db1.array() * (c.b1.array() > S(0)).template cast<S>();
    g.W(kWr1).noalias() += db1 * c.hstd.transpose();
    g.b(kWr1) += db1;
  }

  g.W(kPtProj).noalias() += dvenc * c.pooled.transpose();
  g.b(kPtProj) += dvenc;
  const VecX<S> dpooled = net.W(kPtProj).transpose() * dvenc;

  // Only the argmax columns carry gradient through the max-pool; gather them
  // into a compact block and backprop that block alone.
  const int rows = static_cast<int>(c.a3.rows());
  std::vector<int> cols;
  cols.reserve(rows);
  for (int r = 0; r < rows; ++r) cols.push_back(c.argmax[r]);
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  const int k = static_cast<int>(cols.size());
  std::vector<int> col_slot(c.a3.cols(), -1);
  for (int i = 0; i < k; ++i) col_slot[cols[i]] = i;

  MatX<S> da3 = MatX<S>::Zero(rows, k);
  for (int r = 0; r < rows; ++r) da3(r, col_slot[c.argmax[r]]) += dpooled[r];

  MatX<S> a2s(c.a2.rows(), k), a1s(c.a1.rows(), k), x0s(3, k);
  for (int i = 0; i < k; ++i) {
    a2s.col(i) = c.a2.col(cols[i]);
    a1s.col(i) = c.a1.col(cols[i]);
    x0s.col(i) = c.x0.col(cols[i]);
  }

  g.W(kPt3).noalias() += da3 * a2s.transpose();
  g.b(kPt3) += da3.rowwise().sum();
  MatX<S> da2 = net.W(kPt3).transpose() * da3;
  da2 = da2.array() * (a2s.array() > S(0)).template cast<S>();
  g.W(kPt2).noalias() += da2 * a1s.transpose();
  g.b(kPt2) += da2.rowwise().sum();
  MatX<S> da1 = net.W(kPt2).transpose() * da2;
  da1 = da1.array() * (a1s.array() > S(0)).template cast<S>();
  g.W(kPt1).noalias() += da1 * x0s.transpose();
  g.b(kPt1) += da1.rowwise().sum();
}

// ---------------------------------------------------------------------------
// Dynamics

template <typename S>
struct DynCache {
  VecX<S> z_in, a_in, q, d1, d2, zn, o1, o2, off;
};

template <typename S>
void dynamics_forward(const Net<S>& net, const VecX<S>& z, const VecX<S>& a,
                      DynCache<S>& c) {
  c.z_in = z;
  c.a_in = a;
  const VecX<S> za = net.W(kAEmb) * a + net.b(kAEmb);
  c.q.resize(192);
  c.q << z, za;
  c.d1 = relu_linear(net, kDyn1, c.q);
  c.d2 = relu_linear(net, kDyn2, c.d1);
  c.zn = net.W(kDyn3) * c.d2 + net.b(kDyn3);
  if (net.cfg.variant == ModelVariant::kNoOffset) {
    c.off = VecX<S>::Zero(6);
    return;
  }
  c.o1 = relu_linear(net, kOff1, c.q);
  c.o2 = relu_linear(net, kOff2, c.o1);
  c.off = net.W(kOff3) * c.o2 + net.b(kOff3);
}

/// Accumulates parameter gradients and returns d(loss)/d(z_in).
template <typename S>
VecX<S> dynamics_backward(const Net<S>& net, const DynCache<S>& c,
                          const VecX<S>& dzn, const VecX<S>& doff, Grad<S>& g) {
  VecX<S> dq = VecX<S>::Zero(192);

  g.W(kDyn3).noalias() += dzn * c.d2.transpose();
  g.b(kDyn3) += dzn;
  VecX<S> dd2 = net.W(kDyn3).transpose() * dzn;
  dd2 = dd2.array() * (c.d2.array() > S(0)).template cast<S>();
  g.W(kDyn2).noalias() += dd2 * c.d1.transpose();
  g.b(kDyn2) += dd2;
  VecX<S> dd1 = net.W(kDyn2).transpose() * dd2;
  dd1 = dd1.array() * (c.d1.array() > S(0)).template cast<S>();
  g.W(kDyn1).noalias() += dd1 * c.q.transpose();
  g.b(kDyn1) += dd1;
  dq += net.W(kDyn1).transpose() * dd1;

  if (net.cfg.variant != ModelVariant::kNoOffset && doff.size() > 0) {
    g.W(kOff3).noalias() += doff * c.o2.transpose();
    g.b(kOff3) += doff;
    VecX<S> do2 = net.W(kOff3).transpose() * doff;
    do2 = do2.array() * (c.o2.array() > S(0)).template cast<S>();
    g.W(kOff2).noalias() += do2 * c.o1.transpose();
    g.b(kOff2) += do2;
    VecX<S> do1 = net.W(kOff2).transpose() * do2;
    do1 = do1.array() * (c.o1.array() > S(0)).template cast<S>();
    g.W(kOff1).noalias() += do1 * c.q.transpose();
    g.b(kOff1) += do1;
    dq += net.W(kOff1).transpose() * do1;
  }

  const VecX<S> dza = dq.tail(64);
  g.W(kAEmb).noalias() += dza * c.a_in.transpose();
  g.b(kAEmb) += dza;
  return dq.head(128);
}

// ---------------------------------------------------------------------------
// Decoder

template <typename S>
struct DecCache {
  VecX<S> z_in, c1, l1, l2, u1, u2;
  S logit = S(0);
  VecX<S> line, wr;
};

template <typename S>
void decoder_forward(const Net<S>& net, const VecX<S>& z, DecCache<S>& c) {
  c.z_in = z;
  c.c1 = relu_linear(net, kBin1, z);
  c.logit = (net.W(kBin2) * c.c1 + net.b(kBin2))(0);
  c.l1 = relu_linear(net, kLine1, z);
  c.l2 = relu_linear(net, kLine2, c.l1);
  c.line = net.W(kLine3) * c.l2 + net.b(kLine3);
  c.u1 = relu_linear(net, kDecW1, z);
  c.u2 = relu_linear(net, kDecW2, c.u1);
  c.wr = net.W(kDecW3) * c.u2 + net.b(kDecW3);
}

template <typename S>
VecX<S> decoder_backward(const Net<S>& net, const DecCache<S>& c, S dlogit,
                         const VecX<S>& dline, const VecX<S>& dwr, Grad<S>& g) {
  VecX<S> dz = VecX<S>::Zero(128);

  if (dlogit != S(0)) {
    VecX<S> dl(1);
    dl << dlogit;
    g.W(kBin2).noalias() += dl * c.c1.transpose();
    g.b(kBin2) += dl;
    VecX<S> dc1 = net.W(kBin2).transpose() * dl;
    dc1 = dc1.array() * (c.c1.array() > S(0)).template cast<S>();
    g.W(kBin1).noalias() += dc1 * c.z_in.transpose();
    g.b(kBin1) += dc1;
    dz += net.W(kBin1).transpose() * dc1;
  }
  if (dline.size() > 0) {
    g.W(kLine3).noalias() += dline * c.l2.transpose();
    g.b(kLine3) += dline;
    VecX<S> dl2 = net.W(kLine3).transpose() * dline;
    dl2 = dl2.array() * (c.l2.array() > S(0)).template cast<S>();
    g.W(kLine2).noalias() += dl2 * c.l1.transpose();
    g.b(kLine2) += dl2;
    VecX<S> dl1 = net.W(kLine2).transpose() * dl2;
    dl1 = dl1.array() * (c.l1.array() > S(0)).template cast<S>();
    g.W(kLine1).noalias() += dl1 * c.z_in.transpose();
    g.b(kLine1) += dl1;
    dz += net.W(kLine1).transpose() * dl1;
  }
  if (dwr.size() > 0) {
    g.W(kDecW3).noalias() += dwr * c.u2.transpose();
    g.b(kDecW3) += dwr;
    VecX<S> du2 = net.W(kDecW3).transpose() * dwr;
    du2 = du2.array() * (c.u2.array() > S(0)).template cast<S>();
    g.W(kDecW2).noalias() += du2 * c.u1.transpose();
    g.b(kDecW2) += du2;
    VecX<S> du1 = net.W(kDecW2).transpose() * du2;
    du1 = du1.array() * (c.u1.array() > S(0)).template cast<S>();
    g.W(kDecW1).noalias() += du1 * c.z_in.transpose();
    g.b(kDecW1) += du1;
    dz += net.W(kDecW1).transpose() * du1;
  }
  return dz;
}

// ---------------------------------------------------------------------------
// Window loss

template <typename S>
struct WindowDataT {
  int horizon = 0;
  std::vector<MatX<S>> clouds;
  std::vector<VecX<S>> wrench_flat;
  std::vector<VecX<S>> actions;
  std::vector<VecX<S>> offsets;
  std::vector<int> c_b;
  std::vector<char> has_line;
  std::vector<VecX<S>> line_ee;
  std::vector<VecX<S>> c_w;
};

template <typename S>
WindowDataT<S> convert_window(const WindowData& w) {
  WindowDataT<S> out;
  out.horizon = w.horizon;
  for (const auto& c : w.clouds) out.clouds.push_back(c.cast<S>());
  for (const auto& h : w.wrench_flat) out.wrench_flat.push_back(h.cast<S>());
  for (const auto& a : w.actions) out.actions.push_back(VecX<S>(a.cast<S>()));
  for (const auto& o : w.offsets) out.offsets.push_back(VecX<S>(o.cast<S>()));
  out.c_b = w.c_b;
  for (const auto& l : w.line_ee) {
    out.has_line.push_back(l.has_value());
    out.line_ee.push_back(l ? VecX<S>(l->cast<S>()) : VecX<S>());
  }
  for (const auto& cw : w.c_w) out.c_w.push_back(VecX<S>(cw.cast<S>()));
  return out;
}

template <typename S>
S stable_bce(S logit, S y, S* dlogit) {
  const S zero(0);
  const S loss = std::max(logit, zero) - logit * y +
                 std::log1p(std::exp(-std::abs(logit)));
  if (dlogit) {
    const S sig = logit >= zero ? S(1) / (S(1) + std::exp(-logit))
                                : std::exp(logit) / (S(1) + std::exp(logit));
    *dlogit = sig - y;
  }
  return loss;
}

/// Scratch caches reused across windows by one worker.
template <typename S>
struct WindowWork {
  EncoderCache<S> enc0;
  std::vector<EncoderCache<S>> enc_target;
  std::vector<DynCache<S>> dyn;
  std::vector<DecCache<S>> dec;
};

/// Eq.-style window loss; fills `g` with the exact gradient when non-null.
template <typename S>
S window_loss(const Net<S>& net, const WindowDataT<S>& w,
              const LossWeights& weights, Grad<S>* g, WindowWork<S>& work,
              bool stop_gradient_targets = false) {
  const int T = w.horizon;
  const bool vision_only = net.cfg.variant == ModelVariant::kVisionOnly;
  const bool no_offset = net.cfg.variant == ModelVariant::kNoOffset;

  work.enc_target.resize(T);
  work.dyn.resize(T);
  work.dec.resize(T + 1);

  std::vector<VecX<S>> zs(T + 1);
  zs[0] = encoder_forward(net, w.clouds[0], w.wrench_flat[0], work.enc0);
  for (int t = 0; t < T; ++t) {
    dynamics_forward(net, zs[t], w.actions[t], work.dyn[t]);
    zs[t + 1] = work.dyn[t].zn;
  }
  for (int t = 0; t <= T; ++t) decoder_forward(net, zs[t], work.dec[t]);
  for (int t = 1; t <= T; ++t)
    encoder_forward(net, w.clouds[t], w.wrench_flat[t], work.enc_target[t - 1]);

  S total(0);
  std::vector<VecX<S>> dzs;
  if (g) dzs.assign(T + 1, VecX<S>::Zero(128));

  const S alpha = S(weights.alpha), beta = S(weights.beta),
          rho = S(weights.rho), gamma = S(weights.gamma);

  for (int t = 0; t <= T; ++t) {
    const DecCache<S>& d = work.dec[t];
    S dlogit(0);
    total += stable_bce(d.logit, S(w.c_b[t]), g ? &dlogit : nullptr);

    VecX<S> dline, dwr;
    if (w.c_b[t] == 1 && w.has_line[t]) {
      const VecX<S> delta = d.line - w.line_ee[t];
      total += alpha * delta.squaredNorm() / S(6);
      if (g) dline = alpha * S(2) / S(6) * delta;
    }
    {
      const VecX<S> delta = d.wr - w.c_w[t];
      total += beta * delta.squaredNorm() / S(6);
      if (g) dwr = beta * S(2) / S(6) * delta;
    }
    if (g) dzs[t] += decoder_backward(net, d, dlogit, dline, dwr, *g);
  }

  std::vector<VecX<S>> doffs(T);
  for (int t = 1; t <= T; ++t) {
    if (!no_offset) {
      const VecX<S> delta = work.dyn[t - 1].off - w.offsets[t - 1];
      total += rho * delta.squaredNorm() / S(6);
      if (g) doffs[t - 1] = rho * S(2) / S(6) * delta;
    }
    const VecX<S> zdelta = zs[t] - work.enc_target[t - 1].z;
    total += gamma * zdelta.squaredNorm() / S(128);
    if (g) {
      const VecX<S> dz = gamma * S(2) / S(128) * zdelta;
      dzs[t] += dz;
      if (!stop_gradient_targets)
        encoder_backward(net, work.enc_target[t - 1], VecX<S>(-dz), *g);
    }
  }
  (void)vision_only;

  if (g) {
    for (int t = T; t >= 1; --t)
      dzs[t - 1] += dynamics_backward(net, work.dyn[t - 1], dzs[t],
                                      doffs[t - 1], *g);
    encoder_backward(net, work.enc0, dzs[0], *g);
  }
  return total;
}

template <typename S>
Net<S> make_net(const ModelConfig& cfg, const S* theta, const VecX<S>& h_mean,
                const VecX<S>& h_std) {
  Net<S> net;
  net.cfg = cfg;
  net.table = build_layer_table(cfg);
  net.theta = theta;
  net.h_mean = h_mean;
  net.h_std = h_std;
  return net;
}

}  // namespace contactservo::detail
