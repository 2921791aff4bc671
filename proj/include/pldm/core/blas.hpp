// Copyright 2026 The PLDM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal cblas_sgemm binding; all heavy matmuls in the project route
// through these helpers so the BLAS dependency stays in one place.

extern "C" {
enum CBLAS_ORDER { CblasRowMajor = 101, CblasColMajor = 102 };
enum CBLAS_TRANSPOSE { CblasNoTrans = 111, CblasTrans = 112 };
void cblas_sgemm(enum CBLAS_ORDER order, enum CBLAS_TRANSPOSE trans_a,
                 enum CBLAS_TRANSPOSE trans_b, int m, int n, int k,
                 float alpha, const float* a, int lda, const float* b, int ldb,
                 float beta, float* c, int ldc);
}

namespace pldm {

// C[m,n] = alpha * A[m,k] @ B[k,n] + beta * C, all row-major contiguous.
inline void sgemm_nn(int m, int n, int k, float alpha, const float* a,
                     const float* b, float beta, float* c) {
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, alpha, a, k,
              b, n, beta, c, n);
}

// C[m,n] = alpha * A[m,k] @ B[n,k]^T + beta * C.
inline void sgemm_nt(int m, int n, int k, float alpha, const float* a,
                     const float* b, float beta, float* c) {
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, n, k, alpha, a, k, b,
              k, beta, c, n);
}

// C[m,n] = alpha * A[k,m]^T @ B[k,n] + beta * C.
inline void sgemm_tn(int m, int n, int k, float alpha, const float* a,
                     const float* b, float beta, float* c) {
  cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, m, n, k, alpha, a, m, b,
              n, beta, c, n);
}

}  // namespace pldm
