#pragma once

// Bidirectional bridge between simulation state and the image domain:
// rendering depth/action images, recovering robot and obstacle states from
// depth images, pasting augmentation obstacles, and composing the two
// predictors' outputs into a next-state image.
//
// Depth encoding: surface height h (cm above the reference plane) maps to
// 2*h/h_max - 1, clamped to [-1, 1].  Obstacles render at surface + height.
// The robot body renders at a fixed band value with a brighter 2-pixel
// front marker so orientation extraction has a sign.

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <stdexcept>
#include <vector>

#include "grain/core.hpp"
#include "grain/image.hpp"
#include "grain/sim.hpp"
#include "grain/terrain.hpp"

namespace grain {

struct EncodeConfig {
    double h_max = 8.0;            // cm mapped onto the full depth range
    float robot_body_value = 0.85f;
    float marker_value = 1.0f;
    float robot_threshold = 0.82f; // body band lower edge
    float marker_threshold = 0.95f;
    double obstacle_band_cm = 1.4; // height above local background
    double default_obstacle_radius = 2.0;
    double marker_length = 2.2;    // cm the notch protrudes past the body
    double marker_width = 2.4;     // cm

    float encode_height(double h_cm) const {
        const double v = 2.0 * h_cm / h_max - 1.0;
        return static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
    double decode_height(float v) const { return (v + 1.0) * 0.5 * h_max; }
};

struct RobotExtraction {
    RobotState state;
    PixelSet pixels;
};

class ExtractionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

// Pixel center in world cm; image row 0 is the uphill edge.
inline Vec2 pixel_center(int row, int col, int height, double mpp) {
    return {(col + 0.5) * mpp, (height - row - 0.5) * mpp};
}

// grid row (uphill-increasing) -> image row
inline int grid_to_image_row(int grid_row, int img_h) { return img_h - 1 - grid_row; }

inline std::vector<PixelSet> connected_components(const std::vector<char>& mask,
                                                  int w, int h) {
    std::vector<PixelSet> comps;
    std::vector<char> seen(mask.size(), 0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const size_t idx = static_cast<size_t>(r) * w + c;
            if (!mask[idx] || seen[idx]) continue;
            PixelSet comp;
            std::queue<std::pair<int, int>> q;
            q.push({r, c});
            seen[idx] = 1;
            while (!q.empty()) {
                auto [cr, cc] = q.front();
                q.pop();
                comp.insert({cr, cc});
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int nr = cr + dr, nc = cc + dc;
                        if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                        const size_t nidx = static_cast<size_t>(nr) * w + nc;
                        if (mask[nidx] && !seen[nidx]) {
                            seen[nidx] = 1;
                            q.push({nr, nc});
                        }
                    }
                }
            }
            comps.push_back(std::move(comp));
        }
    }
    return comps;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

inline DepthImage render_depth(const Heightfield& hf, const RobotState* robot,
                               const std::vector<Obstacle>& obstacles,
                               const RobotGeometry& geom,
                               const EncodeConfig& cfg = {}) {
    const int W = hf.width_cells, H = hf.height_cells;
    DepthImage img = DepthImage::zeros(W, H, hf.cell_size);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
            img.at(r, c) = cfg.encode_height(hf.at(H - 1 - r, c));

    for (const Obstacle& ob : obstacles) {
        const int pr0 = std::max(0, H - 1 - hf.row_of(ob.y + ob.radius) - 1);
        const int pr1 = std::min(H - 1, H - 1 - hf.row_of(ob.y - ob.radius) + 1);
        const int pc0 = std::max(0, hf.col_of(ob.x - ob.radius) - 1);
        const int pc1 = std::min(W - 1, hf.col_of(ob.x + ob.radius) + 1);
        for (int r = pr0; r <= pr1; ++r) {
            for (int c = pc0; c <= pc1; ++c) {
                const Vec2 p = detail::pixel_center(r, c, H, hf.cell_size);
                const double dx = p.x - ob.x, dy = p.y - ob.y;
                if (dx * dx + dy * dy > ob.radius * ob.radius) continue;
                const double surface = hf.at(H - 1 - r, c);
                img.at(r, c) = std::max(img.at(r, c), cfg.encode_height(surface + ob.height));
            }
        }
    }

    if (robot) {
        const double body_len = geom.wheel_base + geom.leg_diameter;
        const double body_wid = geom.leg_track - geom.leg_diameter;
        const Vec2 fwd = heading_vec(robot->phi);
        const Vec2 left = left_vec(robot->phi);
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) {
                const Vec2 d = detail::pixel_center(r, c, H, hf.cell_size) - robot->pos();
                const double u = dot(d, fwd);
                const double v = dot(d, left);
                if (std::fabs(u) <= body_len / 2 && std::fabs(v) <= body_wid / 2) {
                    img.at(r, c) = cfg.robot_body_value;
                } else if (u > body_len / 2 && u <= body_len / 2 + cfg.marker_length &&
                           std::fabs(v) <= cfg.marker_width / 2) {
                    img.at(r, c) = cfg.marker_value;
                }
            }
        }
    }
    return img;
}

inline ActionImage render_action(const RobotState& robot, const RobotGeometry& geom,
                                 Action action, int img_w, int img_h, double mpp) {
    ActionImage img = ActionImage::zeros(img_w, img_h, mpp);
    for (Leg leg : active_legs(action)) {
        const Vec2 origin = geom.leg_position(robot, leg);
        for (const auto& fc : swept_cells(origin, robot.phi, geom.sweep_length,
                                          geom.leg_width, img_w, img_h, mpp)) {
            const int row = detail::grid_to_image_row(fc.row, img_h);
            img.at(row, fc.col, 0) = static_cast<float>(fc.phase);       // red
            img.at(row, fc.col, 2) = static_cast<float>(1.0 - fc.phase); // blue
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

inline RobotExtraction extract_robot(const DepthImage& img, const RobotGeometry& geom,
                                     const EncodeConfig& cfg = {}) {
    const int W = img.width, H = img.height;
    std::vector<char> mask(static_cast<size_t>(W) * H, 0);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
            if (img.at(r, c) >= cfg.robot_threshold)
                mask[static_cast<size_t>(r) * W + c] = 1;

    auto comps = detail::connected_components(mask, W, H);
    if (comps.empty()) throw ExtractionError("extract_robot: no pixels above threshold");
    std::sort(comps.begin(), comps.end(),
              [](const PixelSet& a, const PixelSet& b) { return a.size() > b.size(); });
    if (comps.size() > 1 && comps[0].size() == comps[1].size())
        throw ExtractionError("extract_robot: ambiguous equally-sized components");
    const PixelSet& comp = comps[0];

    // Body pixels drive centroid and axis; marker pixels give the sign.
    double sx = 0, sy = 0;
    int n = 0;
    double mx = 0, my = 0;
    int mn = 0;
    for (const auto& [r, c] : comp) {
        const Vec2 p = detail::pixel_center(r, c, H, img.m_per_px);
        if (img.at(r, c) >= cfg.marker_threshold) {
            mx += p.x; my += p.y; ++mn;
        } else {
            sx += p.x; sy += p.y; ++n;
        }
    }
    if (n < 4) throw ExtractionError("extract_robot: component too small");
    const Vec2 centroid{sx / n, sy / n};

    double cxx = 0, cxy = 0, cyy = 0;
    for (const auto& [r, c] : comp) {
        if (img.at(r, c) >= cfg.marker_threshold) continue;
        const Vec2 p = detail::pixel_center(r, c, H, img.m_per_px);
        const double dx = p.x - centroid.x, dy = p.y - centroid.y;
        cxx += dx * dx; cxy += dx * dy; cyy += dy * dy;
    }
    // Principal axis of the covariance.
    const double theta = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
    Vec2 axis{std::cos(theta), std::sin(theta)};
    if (mn > 0) {
        const Vec2 marker{mx / mn - centroid.x, my / mn - centroid.y};
        if (dot(axis, marker) < 0.0) axis = axis * -1.0;
    }
    RobotExtraction out;
    out.state.x = centroid.x;
    out.state.y = centroid.y;
    out.state.phi = normalize_angle(std::atan2(-axis.x, axis.y));
    out.pixels = comp;
    return out;
}

namespace detail {

// Chamfer distance to the component boundary, in pixels.
inline std::map<std::pair<int, int>, double> distance_transform(const PixelSet& comp) {
    std::map<std::pair<int, int>, double> dist;
    std::queue<std::pair<int, int>> q;
    for (const auto& px : comp) {
        bool boundary = false;
        for (int dr = -1; dr <= 1 && !boundary; ++dr)
            for (int dc = -1; dc <= 1 && !boundary; ++dc)
                if (!comp.count({px.first + dr, px.second + dc})) boundary = true;
        if (boundary) {
            dist[px] = 1.0;
            q.push(px);
        }
    }
    while (!q.empty()) {
        auto px = q.front();
        q.pop();
        const double d = dist[px];
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                std::pair<int, int> np{px.first + dr, px.second + dc};
                if (!comp.count(np)) continue;
                if (!dist.count(np)) {
                    dist[np] = d + 1.0;
                    q.push(np);
                }
            }
        }
    }
    return dist;
}

// Splits a merged component into k lobes via distance-transform peaks and
// nearest-peak assignment; returns lobe centroids in world cm.
inline std::vector<Vec2> split_component(const PixelSet& comp, int img_h, double mpp,
                                         double radius_px) {
    auto dist = distance_transform(comp);
    // Peaks: local maxima of the distance transform, greedily suppressed
    // within one obstacle radius.
    std::vector<std::pair<double, std::pair<int, int>>> cand;
    for (const auto& [px, d] : dist) {
        bool is_max = true;
        for (int dr = -1; dr <= 1 && is_max; ++dr)
            for (int dc = -1; dc <= 1 && is_max; ++dc) {
                auto it = dist.find({px.first + dr, px.second + dc});
                if (it != dist.end() && it->second > d) is_max = false;
            }
        if (is_max) cand.push_back({d, px});
    }
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::pair<int, int>> peaks;
    for (const auto& [d, px] : cand) {
        bool ok = true;
        for (const auto& p : peaks) {
            const double ddr = px.first - p.first, ddc = px.second - p.second;
            if (ddr * ddr + ddc * ddc < radius_px * radius_px * 2.56) { ok = false; break; }
        }
        if (ok) peaks.push_back(px);
    }
    if (peaks.empty()) peaks.push_back(cand.front().second);

    std::vector<double> px_sum(peaks.size(), 0.0), py_sum(peaks.size(), 0.0);
    std::vector<int> count(peaks.size(), 0);
    for (const auto& px : comp) {
        size_t best = 0;
        double best_d = 1e300;
        for (size_t i = 0; i < peaks.size(); ++i) {
            const double ddr = px.first - peaks[i].first, ddc = px.second - peaks[i].second;
            const double d2 = ddr * ddr + ddc * ddc;
            if (d2 < best_d) { best_d = d2; best = i; }
        }
        const Vec2 p = pixel_center(px.first, px.second, img_h, mpp);
        px_sum[best] += p.x;
        py_sum[best] += p.y;
        ++count[best];
    }
    std::vector<Vec2> centroids;
    for (size_t i = 0; i < peaks.size(); ++i)
        if (count[i] > 0) centroids.push_back({px_sum[i] / count[i], py_sum[i] / count[i]});
    return centroids;
}

}  // namespace detail

// Obstacle centroids from connected components standing at least
// obstacle_band_cm above the local background, excluding robot pixels.
// Merged components are separated on the distance transform.
inline std::vector<Obstacle> extract_obstacles(const DepthImage& img,
                                               const PixelSet& robot_pixels,
                                               const EncodeConfig& cfg = {}) {
    const int W = img.width, H = img.height;
    // Local background: min over a 7x7 window, robot pixels excluded.
    std::vector<char> mask(static_cast<size_t>(W) * H, 0);
    const float band = static_cast<float>(2.0 * cfg.obstacle_band_cm / cfg.h_max);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            if (robot_pixels.count({r, c})) continue;
            const float v = img.at(r, c);
            if (v >= cfg.robot_threshold) continue;
            float bg = v;
            for (int dr = -3; dr <= 3; ++dr) {
                for (int dc = -3; dc <= 3; ++dc) {
                    const int nr = r + dr, nc = c + dc;
                    if (nr < 0 || nr >= H || nc < 0 || nc >= W) continue;
                    if (robot_pixels.count({nr, nc})) continue;
                    bg = std::min(bg, img.at(nr, nc));
                }
            }
            if (v - bg >= band) mask[static_cast<size_t>(r) * W + c] = 1;
        }
    }
    const double radius_px = cfg.default_obstacle_radius / img.m_per_px;
    const double min_area = 0.25 * kPi * radius_px * radius_px;
    const double single_area = 1.7 * kPi * radius_px * radius_px;
    std::vector<Obstacle> out;
    int next_id = 0;
    for (const auto& comp : detail::connected_components(mask, W, H)) {
        if (static_cast<double>(comp.size()) < min_area) continue; // noise speck
        std::vector<Vec2> centers;
        if (static_cast<double>(comp.size()) > single_area) {
            centers = detail::split_component(comp, H, img.m_per_px, radius_px);
        } else {
            double sx = 0, sy = 0;
            for (const auto& [r, c] : comp) {
                const Vec2 p = detail::pixel_center(r, c, H, img.m_per_px);
                sx += p.x;
                sy += p.y;
            }
            centers.push_back({sx / comp.size(), sy / comp.size()});
        }
        for (const Vec2& ctr : centers)
            out.push_back(Obstacle{next_id++, ctr.x, ctr.y, cfg.default_obstacle_radius, 2.0});
    }
    std::sort(out.begin(), out.end(), [](const Obstacle& a, const Obstacle& b) {
        if (a.y != b.y) return a.y > b.y;
        return a.x < b.x;
    });
    for (size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
    return out;
}

// Nearest-centroid matching against the previous frame with a 5 cm gate;
// unmatched detections keep fresh ids.
inline std::vector<Obstacle> match_obstacles(const std::vector<Obstacle>& prev,
                                             std::vector<Obstacle> detections,
                                             double gate_cm = 5.0) {
    std::vector<char> used(detections.size(), 0);
    std::vector<Obstacle> matched;
    for (const Obstacle& p : prev) {
        int best = -1;
        double best_d = gate_cm;
        for (size_t i = 0; i < detections.size(); ++i) {
            if (used[i]) continue;
            const double d = norm(detections[i].pos() - p.pos());
            if (d < best_d) { best_d = d; best = static_cast<int>(i); }
        }
        if (best >= 0) {
            used[best] = 1;
            Obstacle o = detections[best];
            o.id = p.id;
            matched.push_back(o);
        }
    }
    int next_id = 0;
    for (const Obstacle& p : prev) next_id = std::max(next_id, p.id + 1);
    for (size_t i = 0; i < detections.size(); ++i) {
        if (!used[i]) {
            Obstacle o = detections[i];
            o.id = next_id++;
            matched.push_back(o);
        }
    }
    return matched;
}

// ---------------------------------------------------------------------------
// Composition and augmentation
// ---------------------------------------------------------------------------

// Combines the environment predictor's delta with the robot predictor's
// delta: robot pixels at t+1 come from the robot prediction, vacated robot
// pixels are filled from surrounding terrain, everything else is the
// environment prediction exactly.
inline DepthImage compose_next(const DepthImage& img_t, const DeltaImage& env_delta,
                               const DeltaImage& robot_delta, const RobotGeometry& geom,
                               const EncodeConfig& cfg = {}) {
    if (img_t.width != env_delta.width || img_t.width != robot_delta.width ||
        img_t.height != env_delta.height || img_t.height != robot_delta.height)
        throw std::invalid_argument("compose_next: shape mismatch");

    RobotExtraction at_t = extract_robot(img_t, geom, cfg);
    const DepthImage robot_img = apply_delta(img_t, robot_delta);
    RobotExtraction at_t1 = extract_robot(robot_img, geom, cfg);
    const PixelSet& p_t = at_t.pixels;
    const PixelSet& p_t1 = at_t1.pixels;

    DepthImage out = apply_delta(img_t, env_delta);
    for (const auto& [r, c] : p_t1) out.at(r, c) = robot_img.at(r, c);

    // Fill vacated robot pixels from the mean of 8-neighbors outside p_t,
    // iterating inward until the hole is closed.
    PixelSet holes;
    for (const auto& px : p_t)
        if (!p_t1.count(px)) holes.insert(px);
    PixelSet filled;
    while (!holes.empty()) {
        std::vector<std::pair<std::pair<int, int>, float>> ready;
        for (const auto& [r, c] : holes) {
            float sum = 0.0f;
            int n = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const int nr = r + dr, nc = c + dc;
                    if (!out.in_bounds(nr, nc)) continue;
                    const std::pair<int, int> np{nr, nc};
                    if (p_t.count(np) && !filled.count(np)) continue;
                    if (p_t1.count(np)) continue; // robot pixels are not terrain
                    sum += out.at(nr, nc);
                    ++n;
                }
            }
            if (n > 0) ready.push_back({{r, c}, sum / n});
        }
        if (ready.empty()) break; // fully enclosed by robot pixels
        for (const auto& [px, v] : ready) {
            out.at(px.first, px.second) = v;
            holes.erase(px);
            filled.insert(px);
        }
    }
    return out;
}

// Stamps 1-3 synthetic obstacle discs at least `exclusion_cm` from the robot
// pixels, leaving the rest of the image untouched.
inline DepthImage paste_obstacle_augment(const DepthImage& img, Rng& rng,
                                         const RobotGeometry& geom,
                                         const EncodeConfig& cfg = {},
                                         double exclusion_cm = 6.0,
                                         std::vector<std::string>* events = nullptr) {
    PixelSet robot_pixels;
    try {
        robot_pixels = extract_robot(img, geom, cfg).pixels;
    } catch (const ExtractionError&) {
        // no robot in frame; the exclusion constraint is vacuous
    }
    DepthImage out = img;
    const int n_obstacles = rng.uniform_int(1, 3);
    const double radius = cfg.default_obstacle_radius;
    const double height_band = 2.0 * 2.0 / cfg.h_max; // 2 cm tall discs
    int placed = 0;
    for (int i = 0; i < n_obstacles; ++i) {
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            const double x = rng.uniform(radius, img.width * img.m_per_px - radius);
            const double y = rng.uniform(radius, img.height * img.m_per_px - radius);
            double min_d = 1e300;
            for (const auto& [r, c] : robot_pixels) {
                const Vec2 p = detail::pixel_center(r, c, img.height, img.m_per_px);
                min_d = std::min(min_d, norm(p - Vec2{x, y}));
            }
            if (min_d < exclusion_cm) continue;
            for (int r = 0; r < img.height; ++r) {
                for (int c = 0; c < img.width; ++c) {
                    const Vec2 p = detail::pixel_center(r, c, img.height, img.m_per_px);
                    const double dx = p.x - x, dy = p.y - y;
                    if (dx * dx + dy * dy > radius * radius) continue;
                    out.at(r, c) = std::min(1.0f, out.at(r, c) + static_cast<float>(height_band));
                }
            }
            ok = true;
            ++placed;
        }
    }
    if (placed == 0 && events) events->push_back("augment-no-placement");
    return out;
}

}  // namespace grain
