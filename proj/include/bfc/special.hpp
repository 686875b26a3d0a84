#pragma once

namespace bfc {

// Scaled complementary error function e^{x^2} erfc(x).
// Stable for all x >= 0; for x < 0 it grows like 2 e^{x^2} and overflows
// near x = -26.6 (use scaled_erfcx when a compensating prefactor exists).
double erfcx(double x);

// e^{logpre} * erfcx(z) without forming either factor when z < 0.
// Requires logpre + z^2 <= ~700 (true whenever the product is representable).
double scaled_erfcx(double logpre, double z);

// e^{logpre} * d/dz erfcx(z)  with  erfcx'(z) = 2 z erfcx(z) - 2/sqrt(pi).
double scaled_erfcx_prime(double logpre, double z);

// e^{logpre} * d^2/dz^2 erfcx(z) = e^{logpre} [(2+4z^2) erfcx(z) - 4z/sqrt(pi)].
double scaled_erfcx_pprime(double logpre, double z);

// Convolution of a zero-mean Gaussian of standard deviation s with the
// two-sided exponential e^{-k|t|}, evaluated at tau:
//   (g_s * e^{-k|.|})(tau) = 1/2 e^{-v^2} [erfcx(c-v) + erfcx(c+v)],
//   c = k s / sqrt(2),  v = tau / (s sqrt(2)).
// gauss_exp_conv_dk / _dk2 are the first/second partial derivatives in k.
double gauss_exp_conv(double k, double s, double tau);
double gauss_exp_conv_dk(double k, double s, double tau);
double gauss_exp_conv_dk2(double k, double s, double tau);

}  // namespace bfc
