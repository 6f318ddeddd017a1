// Copyright 2026 castts Authors
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

#include <doctest.h>

#include "castts/nn/checkpoint.hpp"
#include "castts/nn/modules.hpp"
#include "test_util.hpp"

using namespace castts;
using namespace castts::nn;
using castts::testutil::check_gradients_fd;
using castts::testutil::random_mat;

TEST_CASE("linear layer gradient matches finite differences") {
  Rng rng(7);
  Linear lin("lin", 4, 3, rng);
  const Mat x = random_mat(5, 4, rng);
  const Mat target = random_mat(5, 3, rng);
  std::vector<Parameter*> params;
  lin.params(params);

  auto loss = [&] {
    Tape t;
    return t.mse_loss(lin.forward(t, t.constant(x)), target).val()(0, 0);
  };
  for (Parameter* p : params) p->zero_grad();
  Tape t;
  t.backward(t.mse_loss(lin.forward(t, t.constant(x)), target));
  check_gradients_fd(params, loss, 15, rng);
}

TEST_CASE("layer norm gradient matches finite differences") {
  Rng rng(11);
  LayerNorm ln("ln", 6);
  Parameter x("x", random_mat(4, 6, rng));
  const Mat target = random_mat(4, 6, rng);
  std::vector<Parameter*> params{&x};
  ln.params(params);

  auto loss = [&] {
    Tape t;
    return t.mse_loss(ln.forward(t, t.param(x)), target).val()(0, 0);
  };
  for (Parameter* p : params) p->zero_grad();
  Tape t;
  t.backward(t.mse_loss(ln.forward(t, t.param(x)), target));
  check_gradients_fd(params, loss, 30, rng);
}

TEST_CASE("elementwise and reduction op gradients") {
  Rng rng(13);
  Parameter a("a", random_mat(3, 4, rng));
  Parameter b("b", random_mat(3, 4, rng));
  const Mat target = random_mat(1, 1, rng);
  std::vector<Parameter*> params{&a, &b};

  auto build = [&](Tape& t) {
    Var x = t.mul(t.tanh(t.param(a)), t.sigmoid(t.param(b)));
    x = t.add(x, t.relu(t.sub(t.param(a), t.param(b))));
    x = t.add_scalar(t.scale(x, 0.7), 0.3);
    Var pooled = t.mean_rows(x);
    return t.mse_loss(t.mean_all(pooled), target);
  };
  auto loss = [&] {
    Tape t;
    return build(t).val()(0, 0);
  };
  for (Parameter* p : params) p->zero_grad();
  Tape t;
  t.backward(build(t));
  check_gradients_fd(params, loss, 24, rng);
}

TEST_CASE("matmul transpose concat slice gradients") {
  Rng rng(17);
  Parameter a("a", random_mat(3, 4, rng));
  Parameter b("b", random_mat(4, 5, rng));
  const Mat target = random_mat(2, 4, rng);
  std::vector<Parameter*> params{&a, &b};

  auto build = [&](Tape& t) {
    Var prod = t.matmul(t.param(a), t.param(b));     // 3x5
    Var back = t.matmul(prod, t.transpose(t.param(b)));  // 3x4
    Var joined = t.concat_rows({back, t.param(a)});  // 6x4
    Var sliced = t.slice_rows(joined, 2, 2);
    return t.mse_loss(sliced, target);
  };
  auto loss = [&] {
    Tape t;
    return build(t).val()(0, 0);
  };
  for (Parameter* p : params) p->zero_grad();
  Tape t;
  t.backward(build(t));
  check_gradients_fd(params, loss, 30, rng);
}

TEST_CASE("row_select and repeat_rows gradients") {
  Rng rng(19);
  Parameter table("table", random_mat(6, 3, rng));
  const std::vector<Eigen::Index> ids{0, 2, 2, 5};
  const std::vector<Eigen::Index> counts{2, 0, 3, 1};
  const Mat target = random_mat(6, 3, rng);
  std::vector<Parameter*> params{&table};

  auto build = [&](Tape& t) {
    Var rows = t.row_select(t.param(table), ids);
    Var rep = t.repeat_rows(rows, counts);
    return t.mse_loss(rep, target);
  };
  auto loss = [&] {
    Tape t;
    return build(t).val()(0, 0);
  };
  table.zero_grad();
  Tape t;
  t.backward(build(t));
  check_gradients_fd(params, loss, 18, rng);
}

TEST_CASE("masked softmax: visible rows sum to one, masked weights are zero") {
  Rng rng(23);
  Tape t;
  Var logits = t.constant(random_mat(5, 5, rng));
  BoolMat vis(5, 5);
  for (int q = 0; q < 5; ++q)
    for (int k = 0; k < 5; ++k) vis(q, k) = k <= q;
  Var probs = t.masked_softmax_rows(logits, vis);
  for (int q = 0; q < 5; ++q) {
    double sum = 0;
    for (int k = 0; k < 5; ++k) {
      if (!vis(q, k)) CHECK(probs.val()(q, k) == 0.0);
      sum += probs.val()(q, k);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("masked softmax gradient matches finite differences") {
  Rng rng(29);
  Parameter logits("logits", random_mat(4, 4, rng));
  BoolMat vis(4, 4);
  for (int q = 0; q < 4; ++q)
    for (int k = 0; k < 4; ++k) vis(q, k) = (q < 2) ? (k < 2) : true;
  const Mat target = random_mat(4, 4, rng);
  std::vector<Parameter*> params{&logits};

  auto build = [&](Tape& t) {
    return t.mse_loss(t.masked_softmax_rows(t.param(logits), vis), target);
  };
  auto loss = [&] {
    Tape t;
    return build(t).val()(0, 0);
  };
  logits.zero_grad();
  Tape t;
  t.backward(build(t));
  check_gradients_fd(params, loss, 16, rng);
}

TEST_CASE("gather_patches and group_rows gradients (conv building blocks)") {
  Rng rng(31);
  Conv2d conv("conv", 2, 3, 3, 2, rng);
  Parameter x("x", random_mat(5 * 4, 2, rng));
  std::vector<Parameter*> params{&x};
  conv.params(params);
  Eigen::Index h2 = 0, w2 = 0;
  {
    Tape probe;
    conv.forward(probe, probe.param(x), 5, 4, &h2, &w2);
  }
  const Mat target = random_mat(h2, w2 * 3, rng);

  auto build = [&](Tape& t) {
    Eigen::Index hh = 0, ww = 0;
    Var out = t.relu(conv.forward(t, t.param(x), 5, 4, &hh, &ww));
    return t.mse_loss(t.group_rows(out, ww), target);
  };
  auto loss = [&] {
    Tape t;
    return build(t).val()(0, 0);
  };
  for (Parameter* p : params) p->zero_grad();
  Tape t;
  t.backward(build(t));
  check_gradients_fd(params, loss, 30, rng);
}

TEST_CASE("conv1d gradient") {
  Rng rng(37);
  Conv1d conv("conv1", 3, 2, 3, rng);
  Parameter x("x", random_mat(6, 3, rng));
  std::vector<Parameter*> params{&x};
  conv.params(params);
  const Mat target = random_mat(6, 2, rng);

  auto build = [&](Tape& t) {
    return t.mse_loss(conv.forward(t, t.param(x)), target);
  };
  auto loss = [&] {
    Tape t;
    return build(t).val()(0, 0);
  };
  for (Parameter* p : params) p->zero_grad();
  Tape t;
  t.backward(build(t));
  check_gradients_fd(params, loss, 20, rng);
}

TEST_CASE("gru gradient through time") {
  Rng rng(41);
  Gru gru("gru", 3, 4, rng);
  Parameter x("x", random_mat(5, 3, rng));
  std::vector<Parameter*> params{&x};
  gru.params(params);
  const Mat target = random_mat(1, 4, rng);

  auto build = [&](Tape& t) {
    return t.mse_loss(gru.forward_last(t, t.param(x)), target);
  };
  auto loss = [&] {
    Tape t;
    return build(t).val()(0, 0);
  };
  for (Parameter* p : params) p->zero_grad();
  Tape t;
  t.backward(build(t));
  check_gradients_fd(params, loss, 40, rng);
}

TEST_CASE("transformer block gradient with attention mask") {
  Rng rng(43);
  TransformerBlock block("blk", 8, 2, 16, 0.0, rng);
  Parameter x("x", random_mat(5, 8, rng));
  std::vector<Parameter*> params{&x};
  block.params(params);
  BoolMat vis(5, 5);
  for (int q = 0; q < 5; ++q)
    for (int k = 0; k < 5; ++k) vis(q, k) = (q < 3) ? (k < 3) : true;
  const Mat target = random_mat(5, 8, rng);
  Rng drop(1);

  auto build = [&](Tape& t) {
    return t.mse_loss(block.forward(t, t.param(x), &vis, Mode::kEval, drop),
                      target);
  };
  auto loss = [&] {
    Tape t;
    return build(t).val()(0, 0);
  };
  for (Parameter* p : params) p->zero_grad();
  Tape t;
  t.backward(build(t));
  check_gradients_fd(params, loss, 60, rng);
}

TEST_CASE("mae loss gradient") {
  Rng rng(47);
  Parameter x("x", random_mat(4, 3, rng));
  const Mat target = random_mat(4, 3, rng);
  std::vector<Parameter*> params{&x};
  auto loss = [&] {
    Tape t;
    return t.mae_loss(t.param(x), target).val()(0, 0);
  };
  x.zero_grad();
  Tape t;
  t.backward(t.mae_loss(t.param(x), target));
  check_gradients_fd(params, loss, 12, rng);
}

TEST_CASE("all-true mask is equivalent to no mask") {
  Rng rng(53);
  TransformerStack stack("s", 2, 8, 2, 16, 0.0, rng);
  const Mat x = random_mat(6, 8, rng);
  BoolMat all = BoolMat::Constant(6, 6, true);
  Rng drop(1);
  Tape t1, t2;
  Var a = stack.forward(t1, t1.constant(x), &all, Mode::kEval, drop);
  Var b = stack.forward(t2, t2.constant(x), nullptr, Mode::kEval, drop);
  CHECK((a.val() - b.val()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dropout: identity in eval mode, rescaled mask in train mode") {
  Rng rng(59);
  Tape t;
  const Mat x = random_mat(50, 20, rng);
  Var in = t.constant(x);
  Rng drop(123);
  Var eval_out = t.dropout(in, 0.4, Mode::kEval, drop);
  CHECK((eval_out.val() - x).cwiseAbs().maxCoeff() == 0.0);
  Var train_out = t.dropout(in, 0.4, Mode::kTrain, drop);
  int zeros = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double v = train_out.val()(i, j);
      if (v == 0.0)
        ++zeros;
      else
        CHECK(v == doctest::Approx(x(i, j) / 0.6));
    }
  CHECK(zeros > 200);
  CHECK(zeros < 600);
}

TEST_CASE("adam converges on a quadratic") {
  Parameter p("p", Mat::Constant(2, 2, 5.0));
  Adam opt({&p}, 0.1);
  for (int i = 0; i < 300; ++i) {
    opt.zero_grad();
    Tape t;
    Var loss = t.mse_loss(t.param(p), Mat::Zero(2, 2));
    t.backward(loss);
    opt.step();
  }
  CHECK(p.value.cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("checkpoint round trip restores parameters and rejects mismatches") {
  Rng rng(61);
  Linear lin("lin", 3, 3, rng);
  std::vector<Parameter*> params;
  lin.params(params);
  const auto dir = testutil::temp_dir("ckpt");
  const Mat original = lin.w.value;
  save_checkpoint(dir / "m.ckpt", params, 42);

  lin.w.value.setZero();
  load_checkpoint(dir / "m.ckpt", params, 42);
  CHECK((lin.w.value - original).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(load_checkpoint(dir / "m.ckpt", params, 43), IoError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt", params, 42), IoError);
}

TEST_CASE("train state round trip restores optimizer moments and rng") {
  Rng rng(67);
  Linear lin("lin", 2, 2, rng);
  std::vector<Parameter*> params;
  lin.params(params);
  Adam opt(params, 1e-3);
  for (int i = 0; i < 3; ++i) {
    opt.zero_grad();
    Tape t;
    t.backward(t.mse_loss(lin.forward(t, t.constant(random_mat(2, 2, rng))),
                          Mat::Zero(2, 2)));
    opt.step();
  }
  Rng data(5), drop(6);
  data();  // advance
  const auto dir = testutil::temp_dir("state");
  save_train_state(dir / "s.bin", opt, 3, data, drop);

  Adam opt2(params, 1e-3);
  Rng data2(99), drop2(99);
  std::int64_t it = 0;
  load_train_state(dir / "s.bin", opt2, &it, &data2, &drop2);
  CHECK(it == 3);
  CHECK(opt2.step_count() == 3);
  CHECK(data2() == data());
  CHECK(drop2() == drop());
}
