#pragma once

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace disentlab {

/// Flushes denormal floats to zero on this thread while alive. Late in VAE
/// training the logit gradients of confidently reconstructed background
/// pixels fall below FLT_MIN, and every product over them takes the slow
/// microcode path. No effect on targets without SSE.
class FlushDenormals {
 public:
#if defined(__SSE__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | kFlushToZero | kDenormalsAreZero); }
  ~FlushDenormals() { _mm_setcsr(saved_); }
#else
  FlushDenormals() = default;
#endif
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
#if defined(__SSE__)
  static constexpr unsigned kFlushToZero = 0x8000;
  static constexpr unsigned kDenormalsAreZero = 0x0040;
  unsigned saved_;
#endif
};

}  // namespace disentlab
