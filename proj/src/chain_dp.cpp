#include "ddcrf/chain_dp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ddcrf {

template <typename Scalar>
SmoothedMax<Scalar> smoothed_max(const Eigen::Ref<const Vector<std::type_identity_t<Scalar>>>& values, Scalar gamma) {
  const Scalar top = values.maxCoeff();
  Vector<Scalar> e = ((values.array() - top) / gamma).exp().matrix();
  const Scalar sum = e.sum();
  return {top + gamma * std::log(sum), e / sum};
}

template <typename Scalar>
std::size_t ChainTape<Scalar>::size_bytes() const {
  std::size_t bytes = static_cast<std::size_t>(argmax_forward.size() + argmax_backward.size()) * sizeof(Label);
  for (const auto& w : weight_forward) bytes += static_cast<std::size_t>(w.size()) * sizeof(Scalar);
  for (const auto& w : weight_backward) bytes += static_cast<std::size_t>(w.size()) * sizeof(Scalar);
  return bytes;
}

namespace {

// One message step: out(j) = max/smax over i of (in(i) + edge(i, j)) where
// edge(i, j) is pair(i, j) when `transposed` is false and pair(j, i)
// otherwise. Records argmax or softmax weights (row j, over i) when asked.
template <typename Scalar>
void relax(const Scalar* in, const Table<Scalar>& pair, bool transposed, Mode mode, Scalar gamma,
           Scalar* out, Label* argmax_row, Table<Scalar>* weights) {
  const Index L = pair.rows();
  for (Index j = 0; j < L; ++j) {
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    Label arg = 0;
    for (Index i = 0; i < L; ++i) {
      const Scalar v = in[i] + (transposed ? pair(j, i) : pair(i, j));
      if (v > best) {
        best = v;
        arg = static_cast<Label>(i);
      }
    }
    if (mode == Mode::max) {
      out[j] = best;
      if (argmax_row) argmax_row[j] = arg;
      continue;
    }
    Scalar sum = 0;
    for (Index i = 0; i < L; ++i) {
      const Scalar e = std::exp((in[i] + (transposed ? pair(j, i) : pair(i, j)) - best) / gamma);
      if (weights) (*weights)(j, i) = e;
      sum += e;
    }
    out[j] = best + gamma * std::log(sum);
    if (weights) weights->row(j) /= sum;
  }
}

template <typename Scalar>
ChainMarginals<Scalar> sweep(const ChainSlice<Scalar>& slice, Mode mode, ChainTape<Scalar>* tape) {
  const Index n = slice.length();
  const Index L = slice.labels();
  if (static_cast<Index>(slice.pairwise.size()) != std::max<Index>(n - 1, 0))
    throw std::invalid_argument("chain slice needs exactly length - 1 pairwise tables");

  ChainMarginals<Scalar> m;
  m.forward.resize(n, L);
  m.backward.resize(n, L);
  if (tape) {
    tape->mode = mode;
    if (mode == Mode::max) {
      tape->argmax_forward.resize(std::max<Index>(n - 1, 0), L);
      tape->argmax_backward.resize(std::max<Index>(n - 1, 0), L);
    } else {
      tape->weight_forward.assign(static_cast<std::size_t>(std::max<Index>(n - 1, 0)), Table<Scalar>(L, L));
      tape->weight_backward.assign(static_cast<std::size_t>(std::max<Index>(n - 1, 0)), Table<Scalar>(L, L));
    }
  }
  const bool record_max = tape && mode == Mode::max;
  const bool record_soft = tape && mode == Mode::smoothed;

  m.forward.row(0) = slice.unary.row(0);
  for (Index k = 1; k < n; ++k) {
    const auto& pair = *slice.pairwise[static_cast<std::size_t>(k - 1)];
    relax(m.forward.row(k - 1).data(), pair, false, mode, slice.gamma, m.forward.row(k).data(),
          record_max ? tape->argmax_forward.row(k - 1).data() : nullptr,
          record_soft ? &tape->weight_forward[static_cast<std::size_t>(k - 1)] : nullptr);
    m.forward.row(k) += slice.unary.row(k);
  }

  m.backward.row(n - 1) = slice.unary.row(n - 1);
  for (Index k = n - 2; k >= 0; --k) {
    const auto& pair = *slice.pairwise[static_cast<std::size_t>(k)];
    relax(m.backward.row(k + 1).data(), pair, true, mode, slice.gamma, m.backward.row(k).data(),
          record_max ? tape->argmax_backward.row(k).data() : nullptr,
          record_soft ? &tape->weight_backward[static_cast<std::size_t>(k)] : nullptr);
    m.backward.row(k) += slice.unary.row(k);
  }

  m.marginals = m.forward + m.backward - slice.unary;
  if (mode == Mode::max)
    m.energy = m.marginals.row(0).maxCoeff();
  else
    m.energy = smoothed_max<Scalar>(m.marginals.row(0).transpose(), slice.gamma).value;
  return m;
}

}  // namespace

template <typename Scalar>
ChainForward<Scalar> chain_forward(const ChainSlice<Scalar>& slice, Mode mode) {
  ChainForward<Scalar> out;
  out.marginals = sweep(slice, mode, &out.tape);
  return out;
}

template <typename Scalar>
ChainMarginals<Scalar> chain_marginals(const ChainSlice<Scalar>& slice, Mode mode) {
  return sweep<Scalar>(slice, mode, nullptr);
}

template <typename Scalar>
ChainGradient<Scalar> chain_backward(const ChainSlice<Scalar>& slice, const ChainTape<Scalar>& tape,
                                     const Eigen::Ref<const Table<std::type_identity_t<Scalar>>>& grad_marginals) {
  const Index n = slice.length();
  const Index L = slice.labels();
  const Index edges = std::max<Index>(n - 1, 0);
  if (grad_marginals.rows() != n || grad_marginals.cols() != L)
    throw std::invalid_argument("grad_marginals shape does not match the chain");
  const bool shapes_ok =
      tape.mode == Mode::max
          ? tape.argmax_forward.rows() == edges && tape.argmax_backward.rows() == edges &&
                (edges == 0 || (tape.argmax_forward.cols() == L && tape.argmax_backward.cols() == L))
          : static_cast<Index>(tape.weight_forward.size()) == edges &&
                static_cast<Index>(tape.weight_backward.size()) == edges;
  if (!shapes_ok || static_cast<Index>(slice.pairwise.size()) != edges)
    throw std::invalid_argument("tape does not match the chain slice");

  ChainGradient<Scalar> g;
  g.pairwise.assign(static_cast<std::size_t>(edges), Table<Scalar>::Zero(L, L));

  // Adjoints of the forward half (flows leaf -> root) and of the backward
  // half (flows root -> leaf). Both start from the marginal gradient.
  Table<Scalar> fwd = grad_marginals;
  Table<Scalar> bwd = grad_marginals;

  for (Index k = n - 2; k >= 0; --k) {
    auto& dpair = g.pairwise[static_cast<std::size_t>(k)];
    if (tape.mode == Mode::max) {
      for (Index b = 0; b < L; ++b) {
        const Label a = tape.argmax_forward(k, b);
        fwd(k, a) += fwd(k + 1, b);
        dpair(a, b) += fwd(k + 1, b);
      }
    } else {
      const auto& w = tape.weight_forward[static_cast<std::size_t>(k)];  // (b, a)
      fwd.row(k).noalias() += fwd.row(k + 1) * w;
      dpair.noalias() += w.transpose() * fwd.row(k + 1).asDiagonal();
    }
  }

  for (Index k = 0; k + 1 < n; ++k) {
    auto& dpair = g.pairwise[static_cast<std::size_t>(k)];
    if (tape.mode == Mode::max) {
      for (Index a = 0; a < L; ++a) {
        const Label b = tape.argmax_backward(k, a);
        bwd(k + 1, b) += bwd(k, a);
        dpair(a, b) += bwd(k, a);
      }
    } else {
      const auto& w = tape.weight_backward[static_cast<std::size_t>(k)];  // (a, b)
      bwd.row(k + 1).noalias() += bwd.row(k) * w;
      dpair.noalias() += bwd.row(k).transpose().asDiagonal() * w;
    }
  }

  g.unary = fwd + bwd - grad_marginals;
  return g;
}

#define DDCRF_INSTANTIATE(S)                                                                   \
  template SmoothedMax<S> smoothed_max(const Eigen::Ref<const Vector<S>>&, S);               \
  template struct ChainTape<S>;                                                              \
  template ChainForward<S> chain_forward(const ChainSlice<S>&, Mode);                         \
  template ChainMarginals<S> chain_marginals(const ChainSlice<S>&, Mode);                     \
  template ChainGradient<S> chain_backward(const ChainSlice<S>&, const ChainTape<S>&,        \
                                           const Eigen::Ref<const Table<S>>&);

DDCRF_INSTANTIATE(double)
DDCRF_INSTANTIATE(float)
#undef DDCRF_INSTANTIATE

}  // namespace ddcrf
