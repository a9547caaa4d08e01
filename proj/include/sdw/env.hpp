#pragma once

// Deterministic gridworld suite: Room and KeyRoom layouts with optional
// darkness, a chasing monster, teleport traps and lava.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "sdw/errors.hpp"
#include "sdw/rng.hpp"

namespace sdw {

enum class Family { Room, KeyRoom };

inline std::string to_string(Family f) { return f == Family::Room ? "Room" : "KeyRoom"; }

inline Family family_from_string(const std::string& s) {
  if (s == "Room") return Family::Room;
  if (s == "KeyRoom") return Family::KeyRoom;
  throw ConfigError("unknown task family '" + s + "' (expected Room or KeyRoom)");
}

enum Action : int { kUp = 0, kDown, kLeft, kRight, kPickup, kApply };
inline constexpr int kNumActions = 6;

enum Channel : int { kAgentCh = 0, kGoalCh, kWallCh, kKeyCh, kDoorCh, kHazardCh, kVisitedCh, kDarkCh };
inline constexpr int kNumChannels = 8;

inline constexpr int kMinGrid = 5;
inline constexpr int kMaxGrid = 15;
inline constexpr std::size_t kFeatureDim = 8;

struct TaskDescriptor {
  std::string task_id;
  Family family = Family::Room;
  int grid_size = 5;
  bool dark = false;
  bool monster = false;
  bool trap = false;
  bool lava = false;
  bool randomized_start = false;
  int max_steps = 100;
  // Per-step cost; unset means 0.01 / max_steps.
  std::optional<double> step_penalty;

  double penalty() const { return step_penalty.value_or(0.01 / static_cast<double>(max_steps)); }

  void validate() const {
    if (grid_size < kMinGrid || grid_size > kMaxGrid || grid_size % 2 == 0)
      throw ConfigError("task '" + task_id + "': grid_size must be odd in [5, 15], got " +
                        std::to_string(grid_size));
    if (max_steps < 4 * grid_size)
      throw ConfigError("task '" + task_id + "': max_steps must be >= 4*grid_size");
    if (step_penalty && !(*step_penalty >= 0.0))
      throw ConfigError("task '" + task_id + "': step_penalty must be >= 0");
  }

  bool operator==(const TaskDescriptor&) const = default;
};

/// [size, dark, monster, trap, lava, randomized_start, is_keyroom, max_steps], all in [0, 1].
inline std::array<double, kFeatureDim> descriptor_features(const TaskDescriptor& d) {
  auto b = [](bool v) { return v ? 1.0 : 0.0; };
  const double steps = static_cast<double>(d.max_steps) / (4.0 * kMaxGrid * kMaxGrid);
  return {static_cast<double>(d.grid_size) / kMaxGrid,
          b(d.dark),
          b(d.monster),
          b(d.trap),
          b(d.lava),
          b(d.randomized_start),
          b(d.family == Family::KeyRoom),
          std::clamp(steps, 0.0, 1.0)};
}

/// Binary observation tensor stored as the sorted indices of its nonzero entries.
/// Layout: index = channel * canvas^2 + row * canvas + col.
class Observation {
 public:
  Observation() = default;
  Observation(std::size_t dim, std::vector<std::uint16_t> active) : dim_(dim), active_(std::move(active)) {}

  std::size_t dim() const { return dim_; }
  const std::vector<std::uint16_t>& active() const { return active_; }

  double operator[](std::size_t i) const {
    return std::binary_search(active_.begin(), active_.end(), static_cast<std::uint16_t>(i)) ? 1.0 : 0.0;
  }

  std::vector<double> dense() const {
    std::vector<double> out(dim_, 0.0);
    for (auto i : active_) out[i] = 1.0;
    return out;
  }

  bool operator==(const Observation&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::uint16_t> active_;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  std::map<std::string, std::string> info;  // "cause" set when done
};

struct Pos {
  int row = 0;
  int col = 0;
  bool operator==(const Pos&) const = default;
  auto operator<=>(const Pos&) const = default;
};

enum class Tile : std::uint8_t { Floor, Wall, Door, Lava, Trap };

class GridEnv {
 public:
  /// canvas_size >= grid_size pads observations so that tasks of different sizes
  /// share one observation shape; padding cells read as walls.
  GridEnv(TaskDescriptor descriptor, std::uint64_t layout_seed, int canvas_size = 0)
      : d_(std::move(descriptor)), layout_seed_(layout_seed) {
    d_.validate();
    g_ = d_.grid_size;
    canvas_ = canvas_size == 0 ? g_ : canvas_size;
    if (canvas_ < g_ || canvas_ > kMaxGrid)
      throw ConfigError("canvas size " + std::to_string(canvas_) + " cannot hold grid " + std::to_string(g_));
    generate_layout();
  }

  const TaskDescriptor& descriptor() const { return d_; }
  std::uint64_t layout_seed() const { return layout_seed_; }
  int grid_size() const { return g_; }
  int canvas_size() const { return canvas_; }
  std::size_t obs_dim() const { return static_cast<std::size_t>(kNumChannels * canvas_ * canvas_); }
  int num_actions() const { return kNumActions; }

  Observation reset(std::uint64_t episode_seed) {
    rng_.seed(mix_seed(layout_seed_, episode_seed));
    done_ = false;
    steps_ = 0;
    has_key_ = false;
    door_open_ = false;
    key_ = layout_key_;
    visited_.assign(static_cast<std::size_t>(g_ * g_), 0);

    if (d_.randomized_start) {
      agent_ = draw_cell(start_region(), {});
      goal_ = draw_cell(goal_region(), {agent_});
    } else {
      agent_ = layout_start_;
      goal_ = layout_goal_;
    }
    if (d_.monster) {
      std::vector<Pos> far;
      for (auto p : start_region())
        if (std::abs(p.row - agent_.row) + std::abs(p.col - agent_.col) >= 3 && p != goal_) far.push_back(p);
      if (far.empty()) far = start_region();
      monster_ = far[uniform_index(rng_, far.size())];
    }
    mark_visited();
    return observe();
  }

  StepResult step(int action) {
    if (done_) throw UsageError("step() called on a finished episode; call reset() first");
    if (action < 0 || action >= kNumActions) throw UsageError("action out of range: " + std::to_string(action));
    ++steps_;
    StepResult out;
    out.reward = -d_.penalty();

    switch (action) {
      case kUp: try_move(-1, 0); break;
      case kDown: try_move(1, 0); break;
      case kLeft: try_move(0, -1); break;
      case kRight: try_move(0, 1); break;
      case kPickup:
        if (key_ && *key_ == agent_) {
          has_key_ = true;
          key_.reset();
        }
        break;
      case kApply:
        if (has_key_ && !door_open_ && door_ && adjacent4(agent_, *door_)) door_open_ = true;
        break;
    }

    std::string cause;
    if (agent_ == goal_) {
      out.reward = 1.0;
      cause = "goal";
    } else if (tile(agent_) == Tile::Lava) {
      out.reward = -1.0;
      cause = "lava";
    } else if (d_.monster && agent_ == monster_) {
      out.reward = -1.0;
      cause = "monster";
    } else if (tile(agent_) == Tile::Trap) {
      agent_ = draw_cell(free_cells(), {});
    }

    if (cause.empty() && d_.monster && steps_ % 2 == 0) {
      move_monster();
      if (monster_ == agent_) {
        out.reward = -1.0;
        cause = "monster";
      }
    }
    if (cause.empty() && steps_ >= d_.max_steps) {
      out.reward = 0.0;
      cause = "timeout";
    }
    if (!cause.empty()) {
      done_ = true;
      out.info["cause"] = cause;
    }
    out.done = done_;
    mark_visited();
    out.observation = observe();
    return out;
  }

  bool done() const { return done_; }
  int steps() const { return steps_; }
  Pos agent() const { return agent_; }
  Pos goal() const { return goal_; }
  std::optional<Pos> key() const { return key_; }
  std::optional<Pos> door() const { return door_; }
  bool door_open() const { return door_open_; }
  bool has_key() const { return has_key_; }
  Pos monster() const { return monster_; }
  Tile tile(Pos p) const { return tiles_[static_cast<std::size_t>(p.row * g_ + p.col)]; }

  /// Scenario hook for tests and probes: moves the agent without consuming a step.
  void place_agent(Pos p) {
    if (!in_bounds(p) || tile(p) == Tile::Wall) throw UsageError("place_agent: not a walkable cell");
    agent_ = p;
    mark_visited();
  }
  void place_monster(Pos p) { monster_ = p; }

  /// Floor cells holding nothing (no goal, key, door, hazard, monster): the trap teleport targets.
  std::vector<Pos> free_cells() const {
    std::vector<Pos> out;
    for (int r = 0; r < g_; ++r)
      for (int c = 0; c < g_; ++c) {
        Pos p{r, c};
        if (tile(p) != Tile::Floor || p == goal_ || (key_ && *key_ == p)) continue;
        if (d_.monster && p == monster_) continue;
        out.push_back(p);
      }
    return out;
  }

  Observation observe() const {
    const int cs = canvas_ * canvas_;
    std::vector<std::uint16_t> active;
    auto visible = [&](int r, int c) {
      return !d_.dark || (std::abs(r - agent_.row) <= 1 && std::abs(c - agent_.col) <= 1);
    };
    for (int ch = 0; ch < kNumChannels; ++ch) {
      for (int r = 0; r < canvas_; ++r) {
        for (int c = 0; c < canvas_; ++c) {
          bool on = false;
          const bool vis = visible(r, c);
          if (ch == kDarkCh) {
            on = !vis;
          } else if (vis) {
            on = channel_at(ch, r, c);
          }
          if (on) active.push_back(static_cast<std::uint16_t>(ch * cs + r * canvas_ + c));
        }
      }
    }
    return Observation(obs_dim(), std::move(active));
  }

 private:
  bool in_bounds(Pos p) const { return p.row >= 0 && p.col >= 0 && p.row < g_ && p.col < g_; }
  static bool adjacent4(Pos a, Pos b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1; }

  bool passable(Pos p) const {
    if (!in_bounds(p)) return false;
    const Tile t = tile(p);
    if (t == Tile::Wall) return false;
    if (t == Tile::Door && !door_open_) return false;
    return true;
  }

  bool channel_at(int ch, int r, int c) const {
    if (r >= g_ || c >= g_) return ch == kWallCh;
    const Pos p{r, c};
    const Tile t = tile(p);
    switch (ch) {
      case kAgentCh: return p == agent_;
      case kGoalCh: return p == goal_;
      case kWallCh: return t == Tile::Wall;
      case kKeyCh: return key_ && *key_ == p;
      case kDoorCh: return t == Tile::Door && !door_open_;
      case kHazardCh: return t == Tile::Lava || t == Tile::Trap || (d_.monster && p == monster_);
      case kVisitedCh: return visited_[static_cast<std::size_t>(r * g_ + c)] != 0;
      default: return false;
    }
  }

  void mark_visited() { visited_[static_cast<std::size_t>(agent_.row * g_ + agent_.col)] = 1; }

  void try_move(int dr, int dc) {
    const Pos next{agent_.row + dr, agent_.col + dc};
    if (passable(next)) agent_ = next;
  }

  // One cell toward the agent. The axis with the larger gap moves first; equal gaps move the row.
  void move_monster() {
    const int dr = agent_.row - monster_.row;
    const int dc = agent_.col - monster_.col;
    const Pos by_row{monster_.row + (dr > 0) - (dr < 0), monster_.col};
    const Pos by_col{monster_.row, monster_.col + (dc > 0) - (dc < 0)};
    std::vector<Pos> order;
    if (std::abs(dr) >= std::abs(dc)) {
      if (dr != 0) order.push_back(by_row);
      if (dc != 0) order.push_back(by_col);
    } else {
      if (dc != 0) order.push_back(by_col);
      if (dr != 0) order.push_back(by_row);
    }
    for (auto p : order) {
      if (passable(p) && tile(p) != Tile::Lava) {
        monster_ = p;
        return;
      }
    }
  }

  Pos draw_cell(const std::vector<Pos>& cells, const std::vector<Pos>& exclude) {
    std::vector<Pos> pool;
    for (auto p : cells)
      if (std::find(exclude.begin(), exclude.end(), p) == exclude.end()) pool.push_back(p);
    if (pool.empty()) throw ConfigError("task '" + d_.task_id + "': no free cell available");
    return pool[uniform_index(rng_, pool.size())];
  }

  // Plain floor cells in the region the agent starts in (left of the partition for KeyRoom).
  std::vector<Pos> start_region() const {
    std::vector<Pos> out;
    for (int r = 0; r < g_; ++r)
      for (int c = 0; c < g_; ++c) {
        Pos p{r, c};
        if (tile(p) != Tile::Floor) continue;
        if (d_.family == Family::KeyRoom && c >= partition_col_) continue;
        if (key_ && *key_ == p) continue;
        out.push_back(p);
      }
    return out;
  }

  std::vector<Pos> goal_region() const {
    if (d_.family == Family::Room) return start_region();
    std::vector<Pos> out;
    for (int r = 0; r < g_; ++r)
      for (int c = partition_col_ + 1; c < g_; ++c) out.push_back({r, c});
    return out;
  }

  // Plain floor cells of the start region form one 4-connected component.
  bool start_region_connected() const {
    const auto cells = start_region();
    if (cells.empty()) return false;
    std::vector<char> seen(static_cast<std::size_t>(g_ * g_), 0);
    std::queue<Pos> q;
    q.push(cells.front());
    seen[static_cast<std::size_t>(cells.front().row * g_ + cells.front().col)] = 1;
    std::size_t reached = 0;
    auto ok = [&](Pos p) {
      if (!in_bounds(p)) return false;
      if (tile(p) != Tile::Floor) return false;
      return !(d_.family == Family::KeyRoom && p.col >= partition_col_);
    };
    while (!q.empty()) {
      const Pos p = q.front();
      q.pop();
      ++reached;
      const Pos nb[4] = {{p.row - 1, p.col}, {p.row + 1, p.col}, {p.row, p.col - 1}, {p.row, p.col + 1}};
      for (auto n : nb) {
        if (!ok(n)) continue;
        auto& s = seen[static_cast<std::size_t>(n.row * g_ + n.col)];
        if (s) continue;
        s = 1;
        q.push(n);
      }
    }
    // The key cell is floor but excluded from start_region(); count it separately.
    const std::size_t expected = cells.size() + (key_ ? 1 : 0);
    return reached == expected;
  }

  void generate_layout() {
    Rng rng(mix_seed(layout_seed_, stream::kLayout));
    for (int attempt = 0; attempt < 1000; ++attempt) {
      tiles_.assign(static_cast<std::size_t>(g_ * g_), Tile::Floor);
      key_.reset();
      door_.reset();
      partition_col_ = g_;
      if (d_.family == Family::KeyRoom) {
        partition_col_ = g_ - 3;
        for (int r = 0; r < g_; ++r) tiles_[static_cast<std::size_t>(r * g_ + partition_col_)] = Tile::Wall;
        const Pos door{static_cast<int>(uniform_index(rng, static_cast<std::size_t>(g_))), partition_col_};
        tiles_[static_cast<std::size_t>(door.row * g_ + door.col)] = Tile::Door;
        door_ = door;
      }
      const int hazard_count = std::max(1, (g_ * g_) / 12);
      auto place = [&](Tile t) {
        for (int i = 0; i < hazard_count; ++i) {
          auto cells = start_region();
          // Keep the cell in front of the door clear.
          if (door_) std::erase(cells, Pos{door_->row, door_->col - 1});
          if (cells.size() <= 3) return;
          const Pos p = cells[uniform_index(rng, cells.size())];
          tiles_[static_cast<std::size_t>(p.row * g_ + p.col)] = t;
        }
      };
      if (d_.lava) place(Tile::Lava);
      if (d_.trap) place(Tile::Trap);
      if (d_.family == Family::KeyRoom) {
        auto cells = start_region();
        key_ = cells[uniform_index(rng, cells.size())];
      }
      if (!start_region_connected()) continue;
      layout_key_ = key_;
      auto starts = start_region();
      if (starts.size() < 2) continue;
      layout_start_ = starts[uniform_index(rng, starts.size())];
      auto goals = goal_region();
      std::erase(goals, layout_start_);
      layout_goal_ = goals[uniform_index(rng, goals.size())];
      // Fresh-episode defaults so the env is observable before reset().
      agent_ = layout_start_;
      goal_ = layout_goal_;
      visited_.assign(static_cast<std::size_t>(g_ * g_), 0);
      return;
    }
    throw ConfigError("task '" + d_.task_id + "': could not generate a connected layout");
  }

  TaskDescriptor d_;
  std::uint64_t layout_seed_;
  int g_ = 0;
  int canvas_ = 0;
  int partition_col_ = 0;

  std::vector<Tile> tiles_;
  std::optional<Pos> layout_key_;
  Pos layout_start_{};
  Pos layout_goal_{};

  Rng rng_;
  bool done_ = true;
  int steps_ = 0;
  Pos agent_{};
  Pos goal_{};
  Pos monster_{};
  std::optional<Pos> key_;
  std::optional<Pos> door_;
  bool has_key_ = false;
  bool door_open_ = false;
  std::vector<std::uint8_t> visited_;
};

inline GridEnv make_env(const TaskDescriptor& descriptor, std::uint64_t seed, int canvas_size = 0) {
  return GridEnv(descriptor, seed, canvas_size);
}

}  // namespace sdw
