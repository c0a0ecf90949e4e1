#pragma once

#include "cachemt/nmt/model.hpp"

// Gated recurrent unit with stacked gate blocks [update ; reset ; candidate]:
//   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br)
//   cand = tanh(Wc x + Uc (r * h) + bc)
//   h' = (1 - z) * h + z * cand
namespace cachemt::nmt::gru {

// `input_proj` is W x + b (3H), computed by the caller so the encoder can
// project a whole sentence at once.
Vector step(const Vector& input_proj, const numeric::ConstMatrixView& u, const Vector& h_prev,
            GruTrace* trace);

// Given dL/dh', accumulates into dW, dU, db and returns dL/dx through dx and
// dL/dh_prev through dh_prev.
void backward(const GruTrace& trace, const Vector& dh, const numeric::ConstMatrixView& w,
              const numeric::ConstMatrixView& u, numeric::MatrixView dw, numeric::MatrixView du,
              numeric::VectorView db, Vector& dx, Vector& dh_prev);

}  // namespace cachemt::nmt::gru
