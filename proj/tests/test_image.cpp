#include <doctest.h>

#include "helpers.hpp"
#include "sprite/errors.hpp"
#include "sprite/image.hpp"
#include "sprite/linalg.hpp"

using namespace sprite;
using namespace sprite::testing;

TEST_SUITE("image") {

TEST_CASE("flatten is row-major") {
  Image img(2, 2);
  img(0, 0) = 1;
  img(0, 1) = 2;
  img(1, 0) = 3;
  img(1, 1) = 4;
  CHECK(flatten(img) == std::vector<double>{1, 2, 3, 4});

  Image one(1, 1);
  one(0, 0) = 7;
  CHECK(flatten(one) == std::vector<double>{7});

  Image rect(2, 3);
  double v = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) rect(i, j) = ++v;
  CHECK(flatten(rect) == std::vector<double>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("flatten/unflatten round-trip") {
  for (auto [h, w] : {std::pair{3, 5}, {1, 7}, {8, 8}}) {
    const Image img = random_image(h, w, 42 + h * w);
    const Image back = unflatten(flatten(img), h, w);
    CHECK(max_abs_diff(img, back) == 0.0);
  }
}

TEST_CASE("decimate selects the d-strided samples") {
  Image hr(4, 4);
  hr(0, 0) = 9;
  Image lr = decimate(hr, 2);
  CHECK(lr.height() == 2);
  CHECK(lr(0, 0) == 9);
  CHECK(lr(0, 1) == 0);

  Image hr2(4, 4);
  hr2(1, 1) = 9;  // off-grid sample dropped
  CHECK(decimate(hr2, 2).max_value() == 0.0);

  const Image any = random_image(6, 6, 3);
  CHECK(max_abs_diff(decimate(any, 1), any) == 0.0);
  CHECK_THROWS_AS(decimate(random_image(5, 5, 1), 2), input_error);
}

TEST_CASE("zero_pad_upsample places samples on the d-lattice") {
  Image lr(1, 1);
  lr(0, 0) = 5;
  Image hr = zero_pad_upsample(lr, 2);
  CHECK(hr.height() == 2);
  CHECK(hr(0, 0) == 5);
  CHECK(hr(0, 1) == 0);
  CHECK(hr(1, 0) == 0);
  CHECK(hr(1, 1) == 0);

  const Image any = random_image(3, 4, 9);
  CHECK(max_abs_diff(zero_pad_upsample(any, 1), any) == 0.0);
}

TEST_CASE("decimate and zero_pad_upsample are exact adjoints") {
  const int d = 2, hr_n = 8, lr_n = 4;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Image x = random_image(hr_n, hr_n, 100 + s);
    const Image y = random_image(lr_n, lr_n, 200 + s);
    const double lhs = dot(flatten(decimate(x, d)), flatten(y));
    const double rhs = dot(flatten(x), flatten(zero_pad_upsample(y, d)));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-15));
  }
  // and their composition is the identity on LR images
  const Image y = random_image(4, 4, 7);
  CHECK(max_abs_diff(decimate(zero_pad_upsample(y, 3), 3), y) == 0.0);
}

TEST_CASE("integer_shift translates with zero fill") {
  Image delta(3, 3);
  delta(1, 1) = 1;
  const Image moved = integer_shift(delta, 1, 0);
  CHECK(moved(2, 1) == 1);
  CHECK(moved(1, 1) == 0);

  const Image img = random_image(5, 5, 11);
  CHECK(max_abs_diff(integer_shift(img, 0, 0), img) == 0.0);

  // interior-supported image: shift then unshift restores it
  Image interior(5, 5);
  interior(2, 2) = 3;
  interior(2, 3) = -1;
  CHECK(max_abs_diff(integer_shift(integer_shift(interior, 1, -1), -1, 1),
                     interior) == 0.0);

  // adjoint of shift by (di,dj) is shift by (-di,-dj)
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Image a = random_image(6, 6, 300 + s);
    const Image b = random_image(6, 6, 400 + s);
    const double lhs = dot(flatten(integer_shift(a, 2, -1)), flatten(b));
    const double rhs = dot(flatten(a), flatten(integer_shift(b, -2, 1)));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-15));
  }
}

TEST_CASE("validation rejects malformed inputs") {
  CHECK_THROWS_AS(Image(0, 3), input_error);
  Image img(2, 2);
  img(0, 0) = std::nan("");
  CHECK_THROWS_AS(img.validate(), input_error);

  LRExposure exp;
  exp.image = random_image(4, 4, 1);
  exp.sigma = -1;
  CHECK_THROWS_AS(exp.validate(), input_error);

  LRStack stack;
  CHECK_THROWS_AS(stack.validate(), input_error);
}

}  // TEST_SUITE
