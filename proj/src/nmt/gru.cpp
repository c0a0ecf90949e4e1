#include "gru.hpp"

#include "cachemt/numeric/ops.hpp"

namespace cachemt::nmt::gru {

Vector step(const Vector& input_proj, const numeric::ConstMatrixView& u, const Vector& h_prev,
            GruTrace* trace) {
  const Eigen::Index h = h_prev.size();
  Vector zr = input_proj.head(2 * h) + u.topRows(2 * h) * h_prev;
  Vector z = numeric::sigmoid(Vector(zr.head(h)));
  Vector r = numeric::sigmoid(Vector(zr.tail(h)));
  Vector rh = r.cwiseProduct(h_prev);
  Vector cand = (input_proj.tail(h) + u.bottomRows(h) * rh).array().tanh();
  Vector out = (1.0 - z.array()) * h_prev.array() + z.array() * cand.array();
  if (trace != nullptr) {
    trace->h_prev = h_prev;
    trace->z = std::move(z);
    trace->r = std::move(r);
    trace->cand = std::move(cand);
  }
  return out;
}

void backward(const GruTrace& tr, const Vector& dh, const numeric::ConstMatrixView& w,
              const numeric::ConstMatrixView& u, numeric::MatrixView dw, numeric::MatrixView du,
              numeric::VectorView db, Vector& dx, Vector& dh_prev) {
  const Eigen::Index h = dh.size();
  const auto z = tr.z.array();
  const auto r = tr.r.array();
  const auto cand = tr.cand.array();
  const auto hp = tr.h_prev.array();

  Vector dpre(3 * h);
  dpre.tail(h) = dh.array() * z * (1.0 - cand * cand);
  dpre.head(h) = dh.array() * (cand - hp) * z * (1.0 - z);
  Vector d_rh = u.bottomRows(h).transpose() * dpre.tail(h);
  dpre.segment(h, h) = d_rh.array() * hp * r * (1.0 - r);

  dh_prev = dh.array() * (1.0 - z) + d_rh.array() * r;
  dh_prev.noalias() += u.topRows(2 * h).transpose() * dpre.head(2 * h);

  const Vector rh = (r * hp).matrix();
  dw.noalias() += dpre * tr.x.transpose();
  du.topRows(2 * h).noalias() += dpre.head(2 * h) * tr.h_prev.transpose();
  du.bottomRows(h).noalias() += dpre.tail(h) * rh.transpose();
  db += dpre;
  dx.noalias() = w.transpose() * dpre;
}

}  // namespace cachemt::nmt::gru
