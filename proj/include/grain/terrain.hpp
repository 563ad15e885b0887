#pragma once

// Domain types shared by every other module: the heightfield substrate,
// robot and obstacle states, the six-action excavation alphabet and the
// robot geometry constants.
//
// Heights are stored relative to the inclined reference plane of the tank,
// so a freshly prepared slope is all zeros regardless of its tilt.  The
// grid is row-major with row index increasing uphill (+y); column index
// increases with +x.

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "grain/core.hpp"

namespace grain {

struct Heightfield {
    int width_cells = 0;    // columns, +x
    int height_cells = 0;   // rows, +y (uphill)
    double cell_size = 1.0; // cm per cell
    double slope_angle = 0.0; // radians, tilt of the reference plane
    std::vector<double> heights; // cm above the reference plane, row-major

    double& at(int row, int col) { return heights[static_cast<size_t>(row) * width_cells + col]; }
    double at(int row, int col) const { return heights[static_cast<size_t>(row) * width_cells + col]; }

    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height_cells && col >= 0 && col < width_cells;
    }

    double width_cm() const { return width_cells * cell_size; }
    double height_cm() const { return height_cells * cell_size; }

    bool contains(const Vec2& p) const {
        return p.x >= 0.0 && p.x < width_cm() && p.y >= 0.0 && p.y < height_cm();
    }

    // Total material volume in cm^3; a pure function of heights.
    double volume() const {
        double s = 0.0;
        for (double h : heights) s += h;
        return s * cell_size * cell_size;
    }

    // cell covering a world point
    int row_of(double y) const { return static_cast<int>(std::floor(y / cell_size)); }
    int col_of(double x) const { return static_cast<int>(std::floor(x / cell_size)); }

    void validate() const {
        if (width_cells < 8 || height_cells < 8)
            throw std::invalid_argument("Heightfield: grid must be at least 8x8");
        if (cell_size <= 0.0)
            throw std::invalid_argument("Heightfield: cell_size must be positive");
        if (heights.size() != static_cast<size_t>(width_cells) * height_cells)
            throw std::invalid_argument("Heightfield: heights size mismatch");
        for (double h : heights) {
            if (!(h >= 0.0) || !std::isfinite(h))
                throw std::invalid_argument("Heightfield: heights must be finite and >= 0");
        }
    }
};

// Maximum downhill height difference over 4-neighbors, divided by cell_size.
// Boundary neighbors are treated as absent.  Plane tilt is not included;
// see granular-sim for the effective slope.
inline double local_slope(const Heightfield& hf, int row, int col) {
    if (!hf.in_bounds(row, col))
        throw std::domain_error("local_slope: cell out of bounds");
    static constexpr int dr[4] = {1, -1, 0, 0};
    static constexpr int dc[4] = {0, 0, 1, -1};
    double best = 0.0;
    for (int k = 0; k < 4; ++k) {
        const int r = row + dr[k], c = col + dc[k];
        if (!hf.in_bounds(r, c)) continue;
        best = std::max(best, (hf.at(row, col) - hf.at(r, c)) / hf.cell_size);
    }
    return best;
}

inline Heightfield make_inclined_field(int width_cells, int height_cells,
                                       double cell_size, double slope_angle) {
    if (slope_angle < 0.0 || slope_angle > 35.0 * kPi / 180.0)
        throw std::invalid_argument("make_inclined_field: slope_angle outside [0, 35 deg]");
    Heightfield hf;
    hf.width_cells = width_cells;
    hf.height_cells = height_cells;
    hf.cell_size = cell_size;
    hf.slope_angle = slope_angle;
    hf.heights.assign(static_cast<size_t>(width_cells) * height_cells, 0.0);
    hf.validate();
    return hf;
}

struct RobotState {
    double x = 0.0;   // cm, lateral
    double y = 0.0;   // cm, fore-aft, increasing uphill
    double phi = 0.0; // radians in (-pi, pi], 0 faces uphill

    Vec2 pos() const { return {x, y}; }

    static RobotState make(double x, double y, double phi, const Heightfield& hf) {
        RobotState s{x, y, normalize_angle(phi)};
        if (!hf.contains(s.pos()))
            throw std::invalid_argument("RobotState: position outside heightfield");
        return s;
    }
};

struct Obstacle {
    int id = 0;
    double x = 0.0;     // cm
    double y = 0.0;     // cm
    double radius = 2.0; // cm
    double height = 2.0; // cm proud of the surface

    Vec2 pos() const { return {x, y}; }

    static Obstacle make(int id, double x, double y, double radius, double height,
                         const Heightfield& hf) {
        if (radius <= 0.0 || height <= 0.0)
            throw std::invalid_argument("Obstacle: radius and height must be positive");
        if (!hf.contains({x, y}))
            throw std::invalid_argument("Obstacle: position outside heightfield");
        return Obstacle{id, x, y, radius, height};
    }
};

// The six multi-leg excavation patterns.
enum class Action : int { LFE = 0, RFE = 1, LP = 2, RP = 3, FP = 4, AF = 5 };

inline constexpr std::array<Action, 6> kAllActions = {
    Action::LFE, Action::RFE, Action::LP, Action::RP, Action::FP, Action::AF};

inline const char* action_name(Action a) {
    switch (a) {
        case Action::LFE: return "LFE";
        case Action::RFE: return "RFE";
        case Action::LP: return "LP";
        case Action::RP: return "RP";
        case Action::FP: return "FP";
        case Action::AF: return "AF";
    }
    throw std::invalid_argument("action_name: bad action");
}

inline Action action_from_name(const std::string& s) {
    for (Action a : kAllActions)
        if (s == action_name(a)) return a;
    throw std::invalid_argument("action_from_name: unknown action '" + s + "'");
}

enum class Leg : int { LF = 0, RF = 1, LH = 2, RH = 3 };

// Legs active under each action.
inline std::vector<Leg> active_legs(Action a) {
    switch (a) {
        case Action::LFE: return {Leg::LF};
        case Action::RFE: return {Leg::RF};
        case Action::LP: return {Leg::LF, Leg::LH};
        case Action::RP: return {Leg::RF, Leg::RH};
        case Action::FP: return {Leg::LF, Leg::RF};
        case Action::AF: return {Leg::LF, Leg::RF, Leg::LH, Leg::RH};
    }
    throw std::invalid_argument("active_legs: bad action");
}

struct RobotGeometry {
    double leg_track = 15.0;   // cm between left and right legs
    double wheel_base = 15.0;  // cm between front and hind legs
    double leg_diameter = 6.0; // cm
    double leg_width = 1.5;    // cm
    double body_height = 8.0;  // cm, top of body above the surface
    double sweep_length = 12.0; // cm, effective action length

    void validate() const {
        if (leg_track <= 0 || wheel_base <= 0 || leg_diameter <= 0 ||
            leg_width <= 0 || body_height <= 0 || sweep_length <= 0)
            throw std::invalid_argument("RobotGeometry: all lengths must be positive");
    }

    // Leg position in world coordinates for a given robot state.
    Vec2 leg_position(const RobotState& s, Leg leg) const {
        const Vec2 fwd = heading_vec(s.phi);
        const Vec2 left = left_vec(s.phi);
        const double fy = (leg == Leg::LF || leg == Leg::RF) ? wheel_base / 2 : -wheel_base / 2;
        const double lx = (leg == Leg::LF || leg == Leg::LH) ? leg_track / 2 : -leg_track / 2;
        return s.pos() + fwd * fy + left * lx;
    }
};

enum class TaskMode { Manipulation, Locomotion, LocoManipulation };

inline const char* mode_name(TaskMode m) {
    switch (m) {
        case TaskMode::Manipulation: return "manipulation";
        case TaskMode::Locomotion: return "locomotion";
        case TaskMode::LocoManipulation: return "loco-manipulation";
    }
    throw std::invalid_argument("mode_name: bad mode");
}

inline TaskMode mode_from_name(const std::string& s) {
    if (s == "manipulation") return TaskMode::Manipulation;
    if (s == "locomotion") return TaskMode::Locomotion;
    if (s == "loco-manipulation") return TaskMode::LocoManipulation;
    throw std::invalid_argument("mode_from_name: unknown mode '" + s + "'");
}

struct Scenario {
    TaskMode mode = TaskMode::Locomotion;
    Heightfield heightfield;
    RobotState robot_start;
    std::vector<Obstacle> obstacles;        // at most 5
    std::vector<Vec2> obstacle_targets;     // one per manipulated obstacle
    std::optional<Vec2> robot_target;
    // Optional half-plane manipulation goal: success when obstacle y <= line.
    std::optional<double> obstacle_goal_line_y;
    double success_radius = 3.0;            // cm
    int max_steps = 30;
    std::uint64_t rng_seed = 0;

    void validate() const {
        heightfield.validate();
        if (obstacles.size() > 5)
            throw std::invalid_argument("Scenario: at most 5 obstacles");
        const bool manip = mode == TaskMode::Manipulation || mode == TaskMode::LocoManipulation;
        const bool loco = mode == TaskMode::Locomotion || mode == TaskMode::LocoManipulation;
        if (manip && obstacle_targets.empty() && !obstacle_goal_line_y)
            throw std::invalid_argument("Scenario: manipulation mode needs obstacle targets");
        if (loco && !robot_target)
            throw std::invalid_argument("Scenario: locomotion mode needs a robot target");
        if (!obstacle_targets.empty() && obstacle_targets.size() > obstacles.size())
            throw std::invalid_argument("Scenario: more targets than obstacles");
        if (max_steps <= 0)
            throw std::invalid_argument("Scenario: max_steps must be positive");
        if (!heightfield.contains(robot_start.pos()))
            throw std::invalid_argument("Scenario: robot start outside field");
        for (const auto& o : obstacles)
            if (!heightfield.contains(o.pos()))
                throw std::invalid_argument("Scenario: obstacle outside field");
    }
};

}  // namespace grain
