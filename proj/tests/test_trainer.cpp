#include <doctest.h>

#include "hydra/adam.hpp"
#include "hydra/dataset.hpp"
#include "hydra/serialize.hpp"
#include "hydra/trainer.hpp"
#include "helpers.hpp"

using namespace hydra;
using namespace hydra::train;

namespace {

TrainPlan default_plan() { return TrainPlan{}; }

ModelConfig tiny_model() {
  ModelConfig model;
  model.input_h = 12;
  model.input_w = 12;
  model.input_c = 4;
  model.fc = {16};
  model.dropout = 0.5;
  model.res_blocks = 1;
  model.dense_blocks = 1;
  model.dense_block_layers = 1;
  model.dense_growth = 4;
  model.res_stem_channels = 4;
  model.dense_stem_channels = 4;
  return model;
}

BodyConfig default_body() {
  BodyConfig body;
  body.crop.kind = aug::CropKind::ExtPan;
  body.crop.expansion_factor = 2.0;
  body.crop.min_size = 4;
  return body;
}

HeadConfig make_head(int id, Arch arch, aug::CropKind crop,
                     weighting::SchemeKind scheme = weighting::SchemeKind::Unweighted) {
  HeadConfig head;
  head.id = id;
  head.arch = arch;
  head.crop.kind = crop;
  head.crop.expansion_factor = 2.0;
  head.crop.min_size = 4;
  head.augment_label = "flip";
  head.augment.flip_h = true;
  head.augment.flip_v = true;
  head.weighting.kind = scheme;
  head.seed = static_cast<std::uint64_t>(id);
  return head;
}

struct Fixture {
  testutil::TempDir dir{"trainer"};
  data::GeneratedDataset dataset;

  explicit Fixture(double noise = 0.2, int classes = 3, long train_regions = 18,
                   long eval_regions = 9) {
    data::GenSpec spec;
    spec.classes = classes;
    spec.image_size = 24;
    spec.train_regions = train_regions;
    spec.eval_regions = eval_regions;
    spec.test_regions = 0;
    spec.noise = noise;
    dataset = data::generate_synthetic(spec, 1234, dir.path());
  }
};

}  // namespace

TEST_CASE("lr_at reproduces the three-phase schedule") {
  const TrainPlan plan = default_plan();
  CHECK(lr_at(plan, 0) == 1e-4);
  CHECK(lr_at(plan, 1) == 1e-5);
  CHECK(lr_at(plan, 2) == 1e-5);
  CHECK(lr_at(plan, 3) == 1e-5);
  CHECK(lr_at(plan, 4) == 1e-6);
  CHECK_THROWS_AS(lr_at(plan, 5), ContractError);
  CHECK_THROWS_AS(lr_at(plan, -1), ContractError);

  TrainPlan bad = plan;
  bad.head_epochs = 4;  // schedule still sums to 5
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = plan;
  bad.head_lr_schedule[0].second = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("cost report arithmetic") {
  TrainPlan plan = default_plan();  // 6 + 5
  std::vector<HeadConfig> roster;
  for (int i = 0; i < 8; ++i) roster.push_back(make_head(i, Arch::Dense, aug::CropKind::ExtPan));
  for (int i = 8; i < 12; ++i)
    roster.push_back(make_head(i, Arch::Residual, aug::CropKind::ExtPan));

  const CostReport cost = cost_report(plan, roster);
  CHECK(cost.hydra_epochs == 72);
  CHECK(cost.independent_epochs == 132);
  CHECK(cost.ratio == doctest::Approx(132.0 / 72.0).epsilon(1e-12));
  CHECK(cost.ratio >= 1.8);
  CHECK(cost.ratio <= 1.9);

  SUBCASE("one head, one architecture") {
    const CostReport solo = cost_report(plan, {make_head(1, Arch::Dense, aug::CropKind::ExtPan)});
    CHECK(solo.hydra_epochs == 11);
    CHECK(solo.independent_epochs == 11);
    CHECK(solo.ratio == doctest::Approx(1.0));
  }

  SUBCASE("as many architectures as heads gives no speedup") {
    const CostReport two = cost_report(plan, {make_head(1, Arch::Dense, aug::CropKind::ExtPan),
                                              make_head(2, Arch::Residual, aug::CropKind::ExtPan)});
    CHECK(two.ratio == doctest::Approx(1.0));
  }
}

TEST_CASE("both architectures build and count parameters") {
  const ModelConfig model;
  for (Arch arch : {Arch::Residual, Arch::Dense}) {
    const auto specs = make_architecture(arch, model, 9);
    const Network net = build_network<Real>(specs, {model.input_h, model.input_w, model.input_c},
                                            8, 9, 7);
    CHECK(net.parameter_count() > 0);
    CHECK(net.bound.back().out_shape == std::vector<Index>{9});
  }
}

TEST_CASE("zero-epoch trainings return exact copies") {
  Fixture fx;
  TrainPlan plan = default_plan();
  plan.body_epochs = 0;
  plan.head_epochs = 0;
  plan.head_lr_schedule = {};
  const Trainer trainer(tiny_model(), plan, default_body(), fx.dataset.train, &fx.dataset.eval, 5);

  // 0 body epochs: checkpoint equals seeded initialization.
  const TrainResult body = trainer.train_body(Arch::Dense);
  Network init = build_network<Real>(make_architecture(Arch::Dense, tiny_model(), 4),
                                     {12, 12, 4}, data::MetadataRecord::kFieldCount, 4,
                                     mix_seed({5, 0xb0d7ULL, static_cast<std::uint64_t>(Arch::Dense)}));
  CHECK(serialize::parameter_checksum(body.net) == serialize::parameter_checksum(init));

  // 0 head epochs: head equals the body (fork fidelity).
  const TrainResult head =
      trainer.train_head(body.net, make_head(1, Arch::Dense, aug::CropKind::ExtPan));
  CHECK(serialize::parameter_checksum(head.net) == serialize::parameter_checksum(body.net));
}

TEST_CASE("training is deterministic per seed and diverges across seeds") {
  Fixture fx;
  TrainPlan plan = default_plan();
  plan.body_epochs = 2;
  plan.head_epochs = 1;
  plan.head_lr_schedule = {{1, 1e-3}};
  plan.body_lr = 1e-3;
  plan.batch_size = 8;

  const Trainer a(tiny_model(), plan, default_body(), fx.dataset.train, &fx.dataset.eval, 77);
  const Trainer b(tiny_model(), plan, default_body(), fx.dataset.train, &fx.dataset.eval, 77);
  const TrainResult body_a = a.train_body(Arch::Residual);
  const TrainResult body_b = b.train_body(Arch::Residual);
  CHECK(serialize::parameter_checksum(body_a.net) == serialize::parameter_checksum(body_b.net));
  CHECK(log_csv(body_a.log) == log_csv(body_b.log));

  const Trainer c(tiny_model(), plan, default_body(), fx.dataset.train, &fx.dataset.eval, 78);
  const TrainResult body_c = c.train_body(Arch::Residual);
  CHECK(serialize::parameter_checksum(body_a.net) != serialize::parameter_checksum(body_c.net));

  SUBCASE("head training is reproducible too") {
    const TrainResult head_a =
        a.train_head(body_a.net, make_head(3, Arch::Residual, aug::CropKind::OrigPan));
    const TrainResult head_b =
        b.train_head(body_b.net, make_head(3, Arch::Residual, aug::CropKind::OrigPan));
    CHECK(serialize::parameter_checksum(head_a.net) == serialize::parameter_checksum(head_b.net));
  }
}

TEST_CASE("heads with different weighting schemes drift apart") {
  Fixture fx;
  TrainPlan plan = default_plan();
  plan.body_epochs = 1;
  plan.head_epochs = 1;
  plan.head_lr_schedule = {{1, 1e-3}};
  plan.batch_size = 8;
  const Trainer trainer(tiny_model(), plan, default_body(), fx.dataset.train, &fx.dataset.eval, 9);
  const TrainResult body = trainer.train_body(Arch::Dense);
  const TrainResult h1 = trainer.train_head(
      body.net, make_head(1, Arch::Dense, aug::CropKind::ExtPan, weighting::SchemeKind::Unweighted));
  const TrainResult h2 = trainer.train_head(
      body.net,
      make_head(1, Arch::Dense, aug::CropKind::ExtPan, weighting::SchemeKind::FrequencyBalanced));
  CHECK(serialize::parameter_checksum(h1.net) != serialize::parameter_checksum(h2.net));
}

TEST_CASE("spawn_heads copies bodies and rejects missing architectures") {
  Fixture fx;
  TrainPlan plan = default_plan();
  plan.body_epochs = 0;
  plan.head_epochs = 0;
  plan.head_lr_schedule = {};
  const Trainer trainer(tiny_model(), plan, default_body(), fx.dataset.train, nullptr, 3);
  std::map<Arch, Network> bodies;
  bodies.emplace(Arch::Dense, trainer.train_body(Arch::Dense).net);

  const auto nets = spawn_heads(bodies, {make_head(1, Arch::Dense, aug::CropKind::ExtPan),
                                         make_head(2, Arch::Dense, aug::CropKind::OrigPan)});
  REQUIRE(nets.size() == 2);
  CHECK(serialize::parameter_checksum(nets[0]) ==
        serialize::parameter_checksum(bodies.at(Arch::Dense)));
  CHECK(serialize::parameter_checksum(nets[1]) ==
        serialize::parameter_checksum(bodies.at(Arch::Dense)));

  CHECK_THROWS_AS(spawn_heads(bodies, {make_head(3, Arch::Residual, aug::CropKind::ExtPan)}),
                  ContractError);
}

TEST_CASE("separable data: a one-layer network hits 100% train accuracy within 6 epochs") {
  // Smoke-test oracle: flatten -> dense(m) trained with Adam on noise-free
  // two-class data, crops prepared through the standard eval-mode pipeline.
  Fixture fx(0.0, 2, 16, 4);
  const Eigen::VectorXd means = data::metadata_means(fx.dataset.train);
  const LoadedSplit split = Trainer::load_split(fx.dataset.train, means);

  aug::CropStyle crop;
  crop.kind = aug::CropKind::OrigPan;
  std::vector<Tensor> pixels;
  std::vector<int> labels;
  for (std::size_t i = 0; i < split.manifest->records.size(); ++i) {
    pixels.push_back(*prepare_pixels(split, i, crop, nullptr, 0, 0, false, 12, 12, 3));
    labels.push_back(split.manifest->records[i].label);
  }

  Network net = build_network<Real>({LayerSpec::flatten(), LayerSpec::dense(3)}, {12, 12, 3}, 0,
                                    3, 11);
  AdamState state = AdamState::like(net.params);
  const VectorT<Real> w = VectorT<Real>::Ones(3);
  double accuracy = 0.0;
  for (int epoch = 0; epoch < 6 && accuracy < 1.0; ++epoch) {
    long correct = 0;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      auto result = backward(net, pixels[i], Tensor(), labels[i], w, false, 0);
      Index best = 0;
      for (Index k = 1; k < 3; ++k)
        if (result.scores[k] > result.scores[best]) best = k;
      if (best == labels[i]) ++correct;
      adam_step(net.params, result.grads, state, 1e-2);
    }
    accuracy = static_cast<double>(correct) / static_cast<double>(pixels.size());
  }
  CHECK(accuracy == 1.0);
}

TEST_CASE("head training resumes near the body's accuracy") {
  Fixture fx(0.15, 3, 30, 12);
  TrainPlan plan = default_plan();
  plan.body_epochs = 6;
  plan.body_lr = 3e-3;
  plan.head_epochs = 5;
  plan.head_lr_schedule = {{1, 3e-3}, {3, 3e-4}, {1, 3e-5}};
  plan.batch_size = 8;
  const Trainer trainer(tiny_model(), plan, default_body(), fx.dataset.train, &fx.dataset.eval, 21);
  const TrainResult body = trainer.train_body(Arch::Residual);
  double body_final = 0.0;
  for (const auto& row : body.log)
    if (row.split == "eval") body_final = row.accuracy;

  const TrainResult head =
      trainer.train_head(body.net, make_head(4, Arch::Residual, aug::CropKind::ExtPan));
  double head_first = -1.0;
  for (const auto& row : head.log)
    if (row.split == "eval") {
      head_first = row.accuracy;
      break;
    }
  REQUIRE(head_first >= 0.0);
  CHECK(head_first >= body_final - 0.10);
}

TEST_CASE("predict covers every record and is deterministic") {
  Fixture fx;
  TrainPlan plan = default_plan();
  plan.body_epochs = 1;
  plan.head_epochs = 0;
  plan.head_lr_schedule = {};
  plan.body_lr = 1e-3;
  const Trainer trainer(tiny_model(), plan, default_body(), fx.dataset.train, &fx.dataset.eval, 31);
  const TrainResult body = trainer.train_body(Arch::Dense);
  const LoadedSplit eval = Trainer::load_split(fx.dataset.eval, trainer.train_means());

  aug::CropStyle crop = default_body().crop;
  const fusion::HeadScores scores = predict_split(body.net, crop, eval);
  CHECK(scores.size() == fx.dataset.eval.records.size());
  const fusion::HeadScores again = predict_split(body.net, crop, eval);
  for (std::size_t i = 0; i < scores.size(); ++i) CHECK(scores[i].scores == again[i].scores);
}

TEST_CASE("exploding learning rates abort with the epoch index") {
  // Adam caps each step near lr, so the blow-up needs a step so large that
  // the next forward pass overflows float64.
  Fixture fx;
  TrainPlan plan = default_plan();
  plan.body_epochs = 4;
  plan.body_lr = 1e100;
  plan.head_epochs = 0;
  plan.head_lr_schedule = {};
  plan.batch_size = 4;
  const Trainer trainer(tiny_model(), plan, default_body(), fx.dataset.train, nullptr, 13);
  CHECK_THROWS_WITH_AS(trainer.train_body(Arch::Dense), doctest::Contains("epoch"),
                       DivergenceError);
}
