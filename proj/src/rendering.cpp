#include "fabtip/rendering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "fabtip/csv.hpp"

namespace fabtip {

namespace {
constexpr double kTimeEps = 1e-9;
}

double material_frequency(Material m) {
  switch (m) {
    case Material::Stone: return 5.0;
    case Material::Fabric: return 30.0;
    case Material::Wood: return 100.0;
    case Material::Neutral: return 0.0;
  }
  throw ProtocolError("unknown material");
}

Material material_from_id(std::uint8_t id) {
  if (id > 3) throw ProtocolError("unknown material id " + std::to_string(id));
  return static_cast<Material>(id);
}

std::string_view to_string(Material m) {
  switch (m) {
    case Material::Neutral: return "neutral";
    case Material::Stone: return "stone";
    case Material::Fabric: return "fabric";
    case Material::Wood: return "wood";
  }
  return "unknown";
}

Material parse_material(std::string_view name) {
  for (auto m : {Material::Neutral, Material::Stone, Material::Fabric, Material::Wood})
    if (to_string(m) == name) return m;
  throw ValidationError("unknown material '" + std::string(name) + "'");
}

ChamberSet chambers(std::initializer_list<int> ids) {
  ChamberSet set;
  for (int id : ids) {
    if (id < 1 || id > 4) throw DomainError("chamber id out of range");
    set.set(static_cast<std::size_t>(id - 1));
  }
  return set;
}

void ContactPad::validate() const {
  if (!(side > 0.0)) throw ConfigError("pad side must be positive");
  auto ids = chamber_of_quadrant;
  std::sort(ids.begin(), ids.end());
  if (ids != std::array<int, 4>{1, 2, 3, 4}) throw ConfigError("quadrant map must be a bijection onto chambers 1..4");
}

Eigen::Vector3d ContactPad::corner(Quadrant q) const {
  const double h = side / 2;
  switch (q) {
    case Quadrant::FrontLeft: return {-h, h, 0};
    case Quadrant::FrontRight: return {h, h, 0};
    case Quadrant::BackLeft: return {-h, -h, 0};
    case Quadrant::BackRight: return {h, -h, 0};
  }
  return Eigen::Vector3d::Zero();
}

Scene Scene::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("objects") || !j["objects"].is_array())
    throw ValidationError(path.string() + ": expected an object with an 'objects' array");

  Scene scene;
  std::size_t index = 0;
  for (const auto& o : j["objects"]) {
    auto where = path.string() + ": objects[" + std::to_string(index++) + "]";
    auto vec3 = [&](const char* key) {
      if (!o.contains(key) || !o[key].is_array() || o[key].size() != 3)
        throw ValidationError(where + ": '" + key + "' must be an array of three numbers");
      Eigen::Vector3d v;
      for (int i = 0; i < 3; ++i) {
        if (!o[key][i].is_number()) throw ValidationError(where + ": '" + key + "' must be numeric");
        v[i] = o[key][i].get<double>();
      }
      return v;
    };
    SceneObject obj;
    obj.box.min = vec3("min");
    obj.box.max = vec3("max");
    if (!(obj.box.min.array() < obj.box.max.array()).all())
      throw ValidationError(where + ": min must be below max on every axis");
    if (o.contains("material")) {
      if (!o["material"].is_string()) throw ValidationError(where + ": 'material' must be a string");
      obj.material = parse_material(o["material"].get<std::string>());
    }
    scene.objects.push_back(obj);
  }
  return scene;
}

double penetration_depth(const Eigen::Vector3d& point, const Aabb& box) {
  if (!(box.min.array() < box.max.array()).all()) throw ConfigError("degenerate bounding box");
  if ((point.array() <= box.min.array()).any() || (point.array() >= box.max.array()).any()) return 0.0;
  Eigen::Vector3d to_min = point - box.min;
  Eigen::Vector3d to_max = box.max - point;
  return std::min(to_min.minCoeff(), to_max.minCoeff());
}

std::array<double, 4> quadrant_indentation(const HandSample& pose, const ContactPad& pad, const SceneObject& object) {
  std::array<double, 4> depth{};
  for (int q = 0; q < 4; ++q) {
    Eigen::Vector3d world = pose.position + pose.orientation * pad.corner(static_cast<Quadrant>(q));
    depth[pad.chamber_of_quadrant[q] - 1] = penetration_depth(world, object.box) * 1e3;
  }
  return depth;
}

ContactState scene_contacts(const HandSample& pose, const ContactPad& pad, const Scene& scene) {
  ContactState state;
  for (const auto& obj : scene.objects) {
    auto d = quadrant_indentation(pose, pad, obj);
    for (int c = 0; c < 4; ++c) {
      if (d[c] > state.depth_mm[c]) {
        state.depth_mm[c] = d[c];
        state.material[c] = obj.material;
      }
    }
  }
  return state;
}

ChamberSet contact_mask(const std::array<double, 4>& depth_mm, double threshold_mm) {
  ChamberSet mask;
  for (int c = 0; c < 4; ++c)
    if (depth_mm[c] > threshold_mm) mask.set(c);
  return mask;
}

std::string_view to_string(SlideDirection d) {
  switch (d) {
    case SlideDirection::None: return "none";
    case SlideDirection::Left: return "left";
    case SlideDirection::Right: return "right";
    case SlideDirection::Up: return "up";
    case SlideDirection::Down: return "down";
    case SlideDirection::Clockwise: return "cw";
    case SlideDirection::CounterClockwise: return "ccw";
  }
  return "unknown";
}

SlideDirection dominant_direction(const Eigen::Vector3d& velocity_mm_s, double threshold_mm_s) {
  const double vx = velocity_mm_s.x(), vy = velocity_mm_s.y();
  if (std::hypot(vx, vy) <= threshold_mm_s) return SlideDirection::None;
  if (std::abs(vx) >= std::abs(vy)) return vx > 0 ? SlideDirection::Right : SlideDirection::Left;
  return vy > 0 ? SlideDirection::Up : SlideDirection::Down;
}

std::string_view to_string(RenderMode m) {
  switch (m) {
    case RenderMode::ContactConfig: return "contact";
    case RenderMode::Sliding: return "sliding";
    case RenderMode::Vibro: return "vibro";
  }
  return "unknown";
}

RenderMode parse_render_mode(std::string_view name) {
  for (auto m : {RenderMode::ContactConfig, RenderMode::Sliding, RenderMode::Vibro})
    if (to_string(m) == name) return m;
  throw ValidationError("unknown mode '" + std::string(name) + "' (expected contact, sliding or vibro)");
}

ChamberSet StimulusSchedule::active_at(double elapsed) const {
  ChamberSet set;
  if (elapsed < -kTimeEps) return set;
  double e = elapsed;
  if (repeat_period) e = elapsed - std::floor(elapsed / *repeat_period + kTimeEps) * *repeat_period;
  for (const auto& ev : events)
    if (e >= ev.onset - kTimeEps && e < ev.onset + ev.duration - kTimeEps) set |= ev.chambers;
  return set;
}

void StimulusSchedule::validate() const {
  double last_offset = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!(events[i].duration > 0.0)) throw ConfigError("schedule event durations must be positive");
    if (i > 0 && events[i].onset < events[i - 1].onset) throw ConfigError("schedule events must be sorted by onset");
    last_offset = std::max(last_offset, events[i].onset + events[i].duration);
  }
  if (repeat_period && *repeat_period < last_offset - kTimeEps)
    throw ConfigError("repeat period shorter than the pattern");
}

StimulusSchedule sliding_schedule(SlideDirection direction, TranslationStyle style) {
  StimulusSchedule s;
  s.mode = RenderMode::Sliding;
  const bool pairs = style == TranslationStyle::ChamberPairs;
  // Trailing group first, leading group one interval later.
  auto translation = [&](ChamberSet trailing, ChamberSet leading) {
    s.events = {{trailing, 0.0, kSlideDuration}, {leading, kSlideInterval, kSlideDuration}};
    s.repeat_period = kSlideInterval + kSlideDuration + kSlideRest;
  };
  // Ring order FL -> FR -> BR -> BL is clockwise seen from outside the pad.
  auto rotation = [&](std::array<int, 4> ring) {
    for (int i = 0; i < 4; ++i) s.events.push_back({chambers({ring[i]}), i * kSlideInterval, kSlideDuration});
    s.repeat_period = 3 * kSlideInterval + kSlideDuration + kSlideRest;
  };
  switch (direction) {
    case SlideDirection::Right:
      pairs ? translation(chambers({1, 3}), chambers({2, 4})) : translation(chambers({1}), chambers({2}));
      break;
    case SlideDirection::Left:
      pairs ? translation(chambers({2, 4}), chambers({1, 3})) : translation(chambers({2}), chambers({1}));
      break;
    case SlideDirection::Up:
      pairs ? translation(chambers({3, 4}), chambers({1, 2})) : translation(chambers({3}), chambers({1}));
      break;
    case SlideDirection::Down:
      pairs ? translation(chambers({1, 2}), chambers({3, 4})) : translation(chambers({1}), chambers({3}));
      break;
    case SlideDirection::Clockwise: rotation({1, 2, 4, 3}); break;
    case SlideDirection::CounterClockwise: rotation({3, 4, 2, 1}); break;
    case SlideDirection::None: break;
  }
  return s;
}

bool square_wave_high(double elapsed, double frequency) {
  if (elapsed < 0.0 || frequency <= 0.0) return false;
  double half_periods = std::floor(2.0 * elapsed * frequency + kTimeEps);
  return std::fmod(half_periods, 2.0) == 0.0;
}

std::array<bool, 4> vibro_drive(Material material, ChamberSet active, double t, double phase_origin) {
  std::array<bool, 4> drive{};
  const double f = material_frequency(material);
  if (f <= 0.0) return drive;
  const bool high = square_wave_high(t - phase_origin, f);
  for (int c = 0; c < 4; ++c) drive[c] = active.test(c) && high;
  return drive;
}

HapticFrame compose_frame(const std::array<double, 4>& depth_mm, const std::array<Material, 4>& materials,
                          const Eigen::Vector3d& velocity_mm_s, double angular_velocity_rad_s, std::uint16_t seq,
                          double t) {
  HapticFrame f;
  f.seq = seq;
  f.timestamp_ms = static_cast<std::uint32_t>(std::llround(t * 1e3));
  for (int c = 0; c < 4; ++c) {
    f.indentation_mm[c] = static_cast<float>(depth_mm[c]);
    f.material_id[c] = static_cast<std::uint8_t>(materials[c]);
  }
  for (int i = 0; i < 3; ++i) f.velocity_mm_s[i] = static_cast<float>(velocity_mm_s[i]);
  f.angular_velocity_rad_s = static_cast<float>(angular_velocity_rad_s);
  return f;
}

HapticRenderer::HapticRenderer(Scene scene, ContactPad pad, RendererConfig config)
    : scene_(std::move(scene)), pad_(pad), config_(config) {
  pad_.validate();
  for (const auto& o : scene_.objects)
    if (!(o.box.min.array() < o.box.max.array()).all()) throw ConfigError("degenerate bounding box in scene");
  // Validates both alphas up front.
  (void)ema(0.0, 0.0, config_.alpha_linear);
  (void)ema(0.0, 0.0, config_.alpha_angular);
}

void HapticRenderer::observe(const HandSample& sample) {
  if (std::abs(sample.orientation.norm() - 1.0) > 1e-6) throw ValidationError("hand orientation is not a unit quaternion");
  if (last_) {
    const double dt = sample.timestamp - last_->timestamp;
    if (!(dt > 0.0)) throw ValidationError("hand samples must have strictly increasing timestamps");
    // Pad-frame velocities: rotate the world displacement into the current pad frame.
    Eigen::Vector3d v_world = (sample.position - last_->position) / dt * 1e3;
    Eigen::Vector3d v_pad = sample.orientation.conjugate() * v_world;
    velocity_mm_s_ = ema<Eigen::Vector3d>(velocity_mm_s_, v_pad, config_.alpha_linear);

    Eigen::AngleAxisd delta(last_->orientation.conjugate() * sample.orientation);
    double omega_normal = delta.axis().z() * delta.angle() / dt;
    if (delta.angle() == 0.0) omega_normal = 0.0;
    angular_rad_s_ = ema(angular_rad_s_, omega_normal, config_.alpha_angular);
  }
  last_ = sample;
}

HapticFrame HapticRenderer::compose(std::uint16_t seq, double t) const {
  ContactState contact;
  if (last_) contact = scene_contacts(*last_, pad_, scene_);
  return compose_frame(contact.depth_mm, contact.material, velocity_mm_s_, angular_rad_s_, seq, t);
}

std::vector<HandSample> read_trajectory_csv(const std::filesystem::path& path) {
  auto table = csv::read(path, {"time_s", "px", "py", "pz", "qw", "qx", "qy", "qz"});
  std::vector<HandSample> samples;
  samples.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    HandSample s;
    s.timestamp = r[0];
    s.position = {r[1], r[2], r[3]};
    s.orientation = Eigen::Quaterniond(r[4], r[5], r[6], r[7]);
    auto where = path.string() + ":" + std::to_string(table.lines[i]);
    if (std::abs(s.orientation.norm() - 1.0) > 1e-6) throw ValidationError(where + ": quaternion is not normalized");
    if (!samples.empty() && !(s.timestamp > samples.back().timestamp))
      throw ValidationError(where + ": timestamps must be strictly increasing");
    samples.push_back(s);
  }
  if (samples.empty()) throw ValidationError(path.string() + ": trajectory has no samples");
  return samples;
}

}  // namespace fabtip
