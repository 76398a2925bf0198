#include <doctest.h>

#include "hydra/tensor.hpp"

using namespace hydra;

TEST_CASE("tensor shape and data invariants") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.data().isZero());

  CHECK_THROWS_AS(Tensor({2, 0}), ContractError);
  CHECK_THROWS_AS(Tensor({2, 2}, VectorT<Real>::Zero(3)), ContractError);
  CHECK_THROWS_AS(t.reshaped({5}), ContractError);

  const Tensor r = t.reshaped({3, 2});
  CHECK(r.dim(0) == 3);
  CHECK(r.size() == 6);
}

TEST_CASE("rank-3 element accessor is row-major (h, w, c)") {
  Tensor t({2, 2, 2});
  t.at(1, 0, 1) = Real(7);
  CHECK(t[1 * 4 + 0 * 2 + 1] == Real(7));
}

TEST_CASE("elementwise arithmetic checks shapes") {
  const Tensor a = Tensor::from_values({2}, {1, 2});
  const Tensor b = Tensor::from_values({2}, {10, 20});
  CHECK((a + b).data()[1] == Real(22));
  CHECK((b - a).data()[0] == Real(9));
  CHECK((Real(2) * a).data()[1] == Real(4));
  CHECK_THROWS_AS(a + Tensor({3}), ContractError);
}

TEST_CASE("channel concatenation keeps spatial layout") {
  Tensor a({1, 2, 1});
  a.at(0, 0, 0) = 1;
  a.at(0, 1, 0) = 2;
  Tensor b({1, 2, 2});
  b.at(0, 0, 0) = 3;
  b.at(0, 0, 1) = 4;
  b.at(0, 1, 0) = 5;
  b.at(0, 1, 1) = 6;
  const Tensor c = concat_channels(a, b);
  CHECK(c.shape() == std::vector<Index>{1, 2, 3});
  CHECK(c.at(0, 0, 0) == 1);
  CHECK(c.at(0, 0, 1) == 3);
  CHECK(c.at(0, 0, 2) == 4);
  CHECK(c.at(0, 1, 0) == 2);
  CHECK(c.at(0, 1, 2) == 6);
  CHECK_THROWS_AS(concat_channels(a, Tensor({2, 2, 1})), ContractError);
}

TEST_CASE("finiteness detection") {
  Tensor t({2});
  CHECK(t.all_finite());
  t[0] = std::numeric_limits<Real>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
}
