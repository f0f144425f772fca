#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "fabtip/errors.hpp"
#include "fabtip/rendering.hpp"

using namespace fabtip;

namespace {

SceneObject slab(Material m = Material::Stone) {
  // Top face at z = 0, front half-space y > 0.
  SceneObject o;
  o.box.min = {-1.0, -1.0, -1.0};
  o.box.max = {1.0, 1.0, 0.0};
  o.material = m;
  return o;
}

HandSample at(double x, double y, double z, double t = 0.0) {
  HandSample s;
  s.position = {x, y, z};
  s.timestamp = t;
  return s;
}

std::array<double, 4> scaled(std::array<double, 4> v) {
  for (auto& x : v) x = std::round(x * 1e9) / 1e9;
  return v;
}

}  // namespace

TEST_CASE("quadrant indentation") {
  ContactPad pad;
  SUBCASE("parallel to the top face") {
    auto d = quadrant_indentation(at(0, 0, -1e-3), pad, slab());
    CHECK(scaled(d) == std::array<double, 4>{1, 1, 1, 1});
  }
  SUBCASE("straddling an edge") {
    auto obj = slab();
    obj.box.min.y() = 0.0;
    auto d = quadrant_indentation(at(0, 0, -2e-3), pad, obj);
    CHECK(scaled(d) == std::array<double, 4>{2, 2, 0, 0});
  }
  SUBCASE("outside") {
    auto d = quadrant_indentation(at(0, 0, 5e-3), pad, slab());
    CHECK(d == std::array<double, 4>{0, 0, 0, 0});
  }
  SUBCASE("tilted pad") {
    HandSample s = at(0, 0, 0.0);
    // Rolling about x lowers the front edge.
    s.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(-0.2, Eigen::Vector3d::UnitX()));
    auto d = quadrant_indentation(s, pad, slab());
    const double drop = 15.0 * std::sin(0.2);
    CHECK(d[0] == doctest::Approx(drop));
    CHECK(d[1] == doctest::Approx(drop));
    CHECK(d[2] == 0.0);
    CHECK(d[3] == 0.0);
  }
  SUBCASE("degenerate box") {
    auto obj = slab();
    obj.box.max.z() = obj.box.min.z();
    CHECK_THROWS_AS(quadrant_indentation(at(0, 0, 0), pad, obj), ConfigError);
  }
}

TEST_CASE("scene keeps the deepest object per chamber") {
  Scene scene;
  scene.objects.push_back(slab(Material::Stone));
  auto wood = slab(Material::Wood);
  wood.box.max.z() = 1e-3;
  wood.box.min.x() = 0.0;
  scene.objects.push_back(wood);
  auto c = scene_contacts(at(0, 0, -2e-3), ContactPad{}, scene);
  CHECK(c.depth_mm[0] == doctest::Approx(2.0));
  CHECK(c.material[0] == Material::Stone);
  CHECK(c.depth_mm[1] == doctest::Approx(3.0));
  CHECK(c.material[1] == Material::Wood);
}

TEST_CASE("ema") {
  CHECK(ema(3.0, 7.0, 1.0) == 7.0);
  CHECK(ema(0.0, 10.0, 0.15) == doctest::Approx(1.5));
  CHECK_THROWS_AS(ema(0.0, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(ema(0.0, 1.0, 1.5), ConfigError);
  double y = -4.0;
  for (int n = 1; n <= 30; ++n) {
    y = ema(y, 6.0, 0.15);
    CHECK(std::abs(y - 6.0) == doctest::Approx(std::pow(0.85, n) * 10.0));
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100, 100), a(1e-3, 1.0);
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d p(u(rng), u(rng), u(rng)), x(u(rng), u(rng), u(rng));
    Eigen::Vector3d e = ema<Eigen::Vector3d>(p, x, a(rng));
    for (int k = 0; k < 3; ++k) {
      CHECK(e[k] >= std::min(p[k], x[k]) - 1e-12);
      CHECK(e[k] <= std::max(p[k], x[k]) + 1e-12);
    }
  }
}

TEST_CASE("contact mask") {
  CHECK(contact_mask({2.5, 1.0, 0.0, 3.0}) == chambers({1, 4}));
  CHECK(contact_mask({2.0, 2.0, 2.0, 2.0}).none());
  CHECK(contact_mask({5, 5, 5, 5}).all());
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 4);
  for (int i = 0; i < 1000; ++i) {
    std::array<double, 4> d{u(rng), u(rng), u(rng), u(rng)};
    auto before = contact_mask(d);
    d[rng() % 4] += u(rng);
    CHECK((before & ~contact_mask(d)).none());
  }
}

TEST_CASE("dominant direction") {
  CHECK(dominant_direction({6, 0, 0}) == SlideDirection::Right);
  CHECK(dominant_direction({3, 4, 0}) == SlideDirection::None);
  CHECK(dominant_direction({0, -7, 0}) == SlideDirection::Down);
  CHECK(dominant_direction({-9, 2, 0}) == SlideDirection::Left);
  CHECK(dominant_direction({1, 8, 50}) == SlideDirection::Up);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-20, 20), c(1.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d v(u(rng), u(rng), u(rng));
    auto d = dominant_direction(v);
    if (d != SlideDirection::None) CHECK(dominant_direction(v * c(rng)) == d);
  }
}

TEST_CASE("sliding schedules") {
  auto right = sliding_schedule(SlideDirection::Right);
  REQUIRE(right.events.size() == 2);
  CHECK(right.events[0].chambers == chambers({1, 3}));
  CHECK(right.events[0].onset == 0.0);
  CHECK(right.events[0].duration == doctest::Approx(0.2));
  CHECK(right.events[1].chambers == chambers({2, 4}));
  CHECK(right.events[1].onset == doctest::Approx(0.1));
  CHECK(*right.repeat_period == doctest::Approx(0.8));
  CHECK_NOTHROW(right.validate());

  auto left = sliding_schedule(SlideDirection::Left);
  REQUIRE(left.events.size() == 2);
  CHECK(left.events[0].chambers == right.events[1].chambers);
  CHECK(left.events[1].chambers == right.events[0].chambers);

  CHECK(sliding_schedule(SlideDirection::Up).events[1].chambers == chambers({1, 2}));
  CHECK(sliding_schedule(SlideDirection::Down).events[1].chambers == chambers({3, 4}));

  auto cw = sliding_schedule(SlideDirection::Clockwise);
  auto ccw = sliding_schedule(SlideDirection::CounterClockwise);
  REQUIRE(cw.events.size() == 4);
  REQUIRE(ccw.events.size() == 4);
  CHECK(*cw.repeat_period == doctest::Approx(1.0));
  for (int i = 0; i < 4; ++i) {
    CHECK(cw.events[i].onset == doctest::Approx(0.1 * i));
    CHECK(cw.events[i].duration == doctest::Approx(0.2));
    CHECK(ccw.events[i].chambers == cw.events[3 - i].chambers);
  }
  CHECK(cw.events[0].chambers == chambers({1}));
  CHECK(cw.events[1].chambers == chambers({2}));
  CHECK(cw.events[2].chambers == chambers({4}));
  CHECK(cw.events[3].chambers == chambers({3}));

  auto single = sliding_schedule(SlideDirection::Right, TranslationStyle::SingleChambers);
  CHECK(single.events[0].chambers == chambers({1}));
  CHECK(single.events[1].chambers == chambers({2}));
}

TEST_CASE("schedule evaluation") {
  auto right = sliding_schedule(SlideDirection::Right);
  CHECK(right.active_at(0.05) == chambers({1, 3}));
  CHECK(right.active_at(0.15) == chambers({1, 2, 3, 4}));
  CHECK(right.active_at(0.25) == chambers({2, 4}));
  CHECK(right.active_at(0.5).none());
  CHECK(right.active_at(0.85) == chambers({1, 3}));
  CHECK(right.active_at(-0.01).none());

  StimulusSchedule bad;
  bad.events = {{chambers({1}), 0.0, 0.0}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.events = {{chambers({1}), 0.2, 0.1}, {chambers({2}), 0.1, 0.1}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.events = {{chambers({1}), 0.0, 0.3}};
  bad.repeat_period = 0.2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("vibro drive") {
  const auto all = chambers({1, 2, 3, 4});
  CHECK(vibro_drive(Material::Stone, all, 0.0, 0.0) == std::array<bool, 4>{true, true, true, true});
  CHECK(vibro_drive(Material::Wood, chambers({}), 0.0, 0.0) == std::array<bool, 4>{});
  CHECK(vibro_drive(Material::Neutral, all, 0.0, 0.0) == std::array<bool, 4>{});
  // 100 Hz toggles every 5 ms.
  bool prev = vibro_drive(Material::Wood, all, 0.0, 0.0)[0];
  for (int ms = 1; ms < 100; ++ms) {
    bool now = vibro_drive(Material::Wood, all, ms * 1e-3, 0.0)[0];
    CHECK((now != prev) == (ms % 5 == 0));
    prev = now;
  }
  CHECK_FALSE(vibro_drive(Material::Wood, all, 0.007, 0.0)[0]);
  for (auto m : {Material::Stone, Material::Fabric, Material::Wood}) {
    const double period = 1.0 / material_frequency(m);
    for (int i = 0; i < 50; ++i) {
      const double t = 0.0137 * i + 1e-4;
      CHECK(vibro_drive(m, all, t, 0.002) == vibro_drive(m, all, t + period, 0.002));
    }
  }
  auto drive = vibro_drive(Material::Fabric, chambers({2, 3}), 0.001, 0.0);
  CHECK(drive == std::array<bool, 4>{false, true, true, false});
  CHECK_THROWS_AS(material_from_id(4), ProtocolError);
}

TEST_CASE("compose frame") {
  auto f = compose_frame({}, {}, Eigen::Vector3d::Zero(), 0.0, 0, 0.0);
  CHECK(f == HapticFrame{});
  CHECK(decode(encode(f)));
  auto g = compose_frame({2.5, 1.0, 0.0, 3.0}, {Material::Stone, Material::Neutral, Material::Wood, Material::Fabric},
                         {1.5, -2.0, 0.25}, 0.75, 65535, 1.234);
  CHECK(g.timestamp_ms == 1234);
  CHECK(g.material_id == std::array<std::uint8_t, 4>{1, 0, 3, 2});
  auto back = decode(encode(g));
  REQUIRE(back);
  CHECK(*back.frame == g);
  CHECK(back.frame->indentation_mm == std::array<float, 4>{2.5f, 1.0f, 0.0f, 3.0f});
}

TEST_CASE("renderer differentiates and filters") {
  Scene scene;
  scene.objects.push_back(slab(Material::Fabric));
  HapticRenderer r(scene);
  // 100 mm/s to the right, sampled at 90 Hz.
  for (int i = 0; i < 200; ++i) r.observe(at(i * 0.1 / 90.0, 0, -3e-3, i / 90.0));
  CHECK(r.filtered_velocity_mm_s().x() == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(std::abs(r.filtered_velocity_mm_s().y()) < 1e-9);
  auto f = r.compose(7, 2.0);
  CHECK(f.seq == 7);
  CHECK(f.material_id == std::array<std::uint8_t, 4>{2, 2, 2, 2});
  CHECK(f.indentation_mm[0] == doctest::Approx(3.0f));
  CHECK_THROWS_AS(r.observe(at(0, 0, 0, 1.0)), ValidationError);

  HapticRenderer spin(Scene{});
  for (int i = 0; i < 300; ++i) {
    HandSample s = at(0, 0, 0, i / 90.0);
    s.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(i / 90.0, Eigen::Vector3d::UnitZ()));
    spin.observe(s);
  }
  CHECK(spin.filtered_angular_velocity() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(HapticRenderer(Scene{}, ContactPad{}, RendererConfig{0.0, 0.1}), ConfigError);
}

TEST_CASE("scene and trajectory files") {
  auto dir = std::filesystem::temp_directory_path() / "fabtip_rendering_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "scene.json") << R"({"objects":[{"min":[0,0,0],"max":[1,1,1],"material":"wood"}]})";
    std::ofstream(dir / "bad.json") << R"({"objects":[{"min":[0,0,0],"max":[1,0,1]}]})";
    std::ofstream(dir / "traj.csv") << "time_s,px,py,pz,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n0.1,0,0,0,1,0,0,0\n";
    std::ofstream(dir / "back.csv") << "time_s,px,py,pz,qw,qx,qy,qz\n0.1,0,0,0,1,0,0,0\n0,0,0,0,1,0,0,0\n";
    std::ofstream(dir / "quat.csv") << "time_s,px,py,pz,qw,qx,qy,qz\n0,0,0,0,2,0,0,0\n";
  }
  auto scene = Scene::from_json_file(dir / "scene.json");
  REQUIRE(scene.objects.size() == 1);
  CHECK(scene.objects[0].material == Material::Wood);
  CHECK_THROWS_AS(Scene::from_json_file(dir / "bad.json"), ValidationError);
  CHECK_THROWS_AS(Scene::from_json_file(dir / "missing.json"), IoError);
  CHECK(read_trajectory_csv(dir / "traj.csv").size() == 2);
  CHECK_THROWS_AS(read_trajectory_csv(dir / "back.csv"), ValidationError);
  CHECK_THROWS_AS(read_trajectory_csv(dir / "quat.csv"), ValidationError);
  std::filesystem::remove_all(dir);
}
