#include "kfr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kfr/kernels/kernels.hpp"
#include "kfr/parallel.hpp"

namespace kfr {

namespace {

constexpr double kSnapDistSq = 1e-16;   // |v - p_i| < 1e-8 px snaps to q_i
constexpr double kSingularTol = 1e-12;  // relative determinant threshold

bool finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

// Mean 68-point configuration in a 512x512 frame; mirrored in
// data/mean_face_68.txt (kept in sync by a test).
constexpr Point2 kTemplate512[LandmarkSet::kCount] = {
    {96.000, 230.000},  {99.074, 267.067},  {108.179, 302.710}, {122.965, 335.558},
    {142.863, 364.350}, {167.109, 387.979}, {194.771, 405.537}, {224.786, 416.349},
    {256.000, 420.000}, {287.214, 416.349}, {317.229, 405.537}, {344.891, 387.979},
    {369.137, 364.350}, {389.035, 335.558}, {403.821, 302.710}, {412.926, 267.067},
    {416.000, 230.000}, {136.000, 170.000}, {160.000, 160.101}, {184.000, 156.000},
    {208.000, 160.101}, {232.000, 170.000}, {280.000, 170.000}, {304.000, 160.101},
    {328.000, 156.000}, {352.000, 160.101}, {376.000, 170.000}, {256.000, 180.000},
    {256.000, 205.000}, {256.000, 230.000}, {256.000, 255.000}, {226.000, 280.000},
    {241.000, 286.000}, {256.000, 290.000}, {271.000, 286.000}, {286.000, 280.000},
    {158.000, 202.000}, {171.000, 194.206}, {197.000, 194.206}, {210.000, 202.000},
    {197.000, 209.794}, {171.000, 209.794}, {302.000, 202.000}, {315.000, 194.206},
    {341.000, 194.206}, {354.000, 202.000}, {341.000, 209.794}, {315.000, 209.794},
    {198.000, 340.000}, {205.771, 327.000}, {231.488, 316.436}, {256.000, 314.000},
    {280.512, 316.436}, {306.229, 327.000}, {314.000, 340.000}, {306.229, 353.000},
    {280.512, 363.564}, {256.000, 366.000}, {231.488, 363.564}, {205.771, 353.000},
    {212.000, 340.000}, {224.887, 331.515}, {256.000, 328.000}, {287.113, 331.515},
    {300.000, 340.000}, {287.113, 348.485}, {256.000, 352.000}, {224.887, 348.485},
};

}  // namespace

void LandmarkSet::validate() const {
    if (points.size() != static_cast<std::size_t>(kCount))
        throw LengthMismatch("landmark set has " + std::to_string(points.size()) +
                             " points, expected " + std::to_string(kCount));
    for (const Point2& p : points)
        if (!finite(p)) throw Error("landmark set contains non-finite coordinates");
}

bool LandmarkSet::valid() const noexcept {
    if (points.size() != static_cast<std::size_t>(kCount)) return false;
    for (const Point2& p : points)
        if (!finite(p)) return false;
    return true;
}

ImageBuffer ImageBuffer::make(int w, int h, int c, float fill) {
    ImageBuffer img;
    img.width = w;
    img.height = h;
    img.channels = c;
    img.data.assign(static_cast<std::size_t>(w) * h * c, fill);
    return img;
}

double Similarity::scale() const { return std::sqrt(a * a + b * b); }

Similarity Similarity::inverse() const {
    const double s2 = a * a + b * b;
    Similarity inv;
    inv.a = a / s2;
    inv.b = -b / s2;
    inv.tx = -(inv.a * tx - inv.b * ty);
    inv.ty = -(inv.b * tx + inv.a * ty);
    return inv;
}

Point2 mls_deform_point(Point2 v, std::span<const Point2> p, std::span<const Point2> q) {
    if (p.size() != q.size())
        throw LengthMismatch("mls_deform_point: control point sets differ in length");
    const std::size_t n = p.size();
    if (n < 3) throw DegenerateLandmarks("mls_deform_point: need at least 3 control points");

    double wsum = 0.0;
    double psx = 0.0, psy = 0.0, qsx = 0.0, qsy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = p[i].x - v.x;
        const double dy = p[i].y - v.y;
        const double d2 = dx * dx + dy * dy;
        if (d2 < kSnapDistSq) return q[i];
        const double w = 1.0 / d2;
        wsum += w;
        psx += w * p[i].x;
        psy += w * p[i].y;
        qsx += w * q[i].x;
        qsy += w * q[i].y;
    }
    const Point2 pc{psx / wsum, psy / wsum};
    const Point2 qc{qsx / wsum, qsy / wsum};

    // A = sum w_i p̂_iᵀ p̂_i (2x2 symmetric), B = sum w_i p̂_iᵀ q̂_i
    double a00 = 0.0, a01 = 0.0, a11 = 0.0;
    double b00 = 0.0, b01 = 0.0, b10 = 0.0, b11 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = p[i].x - v.x;
        const double dy = p[i].y - v.y;
        const double w = 1.0 / (dx * dx + dy * dy);
        const double px = p[i].x - pc.x;
        const double py = p[i].y - pc.y;
        const double qx = q[i].x - qc.x;
        const double qy = q[i].y - qc.y;
        a00 += w * px * px;
        a01 += w * px * py;
        a11 += w * py * py;
        b00 += w * px * qx;
        b01 += w * px * qy;
        b10 += w * py * qx;
        b11 += w * py * qy;
    }
    const double det = a00 * a11 - a01 * a01;
    const double scale = 0.5 * (a00 + a11);
    if (!(std::abs(det) > kSingularTol * scale * scale))
        throw DegenerateLandmarks("mls_deform_point: weighted covariance is singular");

    // M = A⁻¹ B, acting on row vectors
    const double inv = 1.0 / det;
    const double m00 = inv * (a11 * b00 - a01 * b10);
    const double m01 = inv * (a11 * b01 - a01 * b11);
    const double m10 = inv * (a00 * b10 - a01 * b00);
    const double m11 = inv * (a00 * b11 - a01 * b01);

    const double dx = v.x - pc.x;
    const double dy = v.y - pc.y;
    return {dx * m00 + dy * m10 + qc.x, dx * m01 + dy * m11 + qc.y};
}

DeformationField mls_build_field(std::span<const Point2> p, std::span<const Point2> q,
                                 int width, int height, int grid_step) {
    if (width <= 0 || height <= 0)
        throw DimensionMismatch("mls_build_field: non-positive field dimensions");
    if (grid_step < 1) throw Error("mls_build_field: grid_step must be >= 1");

    auto make_nodes = [grid_step](int extent) {
        std::vector<int> nodes;
        for (int c = 0; c < extent; c += grid_step) nodes.push_back(c);
        if (nodes.back() != extent - 1) nodes.push_back(extent - 1);
        return nodes;
    };
    const std::vector<int> nx = make_nodes(width);
    const std::vector<int> ny = make_nodes(height);

    // Backward map: evaluate MLS with roles swapped so output pixels pull
    // from source coordinates.
    std::vector<double> node_x(nx.size() * ny.size());
    std::vector<double> node_y(nx.size() * ny.size());
    parallel_for(0, ny.size(), [&](std::size_t r0, std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            for (std::size_t c = 0; c < nx.size(); ++c) {
                const Point2 f = mls_deform_point(
                    {static_cast<double>(nx[c]), static_cast<double>(ny[r])}, q, p);
                node_x[r * nx.size() + c] = f.x;
                node_y[r * nx.size() + c] = f.y;
            }
        }
    }, 4);

    DeformationField field;
    field.width = width;
    field.height = height;
    field.xs.resize(static_cast<std::size_t>(width) * height);
    field.ys.resize(field.xs.size());

    // Cell lookup: uniform spacing except for a possibly shorter last cell.
    auto cell_of = [grid_step](const std::vector<int>& nodes, int coord) {
        std::size_t c = static_cast<std::size_t>(coord) / grid_step;
        if (c >= nodes.size() - 1) c = nodes.size() - 2;
        return c;
    };

    if (nx.size() == 1 && ny.size() == 1) {
        std::fill(field.xs.begin(), field.xs.end(), node_x[0]);
        std::fill(field.ys.begin(), field.ys.end(), node_y[0]);
        return field;
    }

    parallel_for(0, static_cast<std::size_t>(height), [&](std::size_t y0, std::size_t y1) {
        for (std::size_t y = y0; y < y1; ++y) {
            const std::size_t cy = ny.size() > 1 ? cell_of(ny, static_cast<int>(y)) : 0;
            const int ylo = ny[cy];
            const int yhi = ny.size() > 1 ? ny[cy + 1] : ylo;
            const double fy = yhi > ylo ? (static_cast<double>(y) - ylo) / (yhi - ylo) : 0.0;
            const std::size_t row_hi = ny.size() > 1 ? cy + 1 : cy;
            for (int x = 0; x < width; ++x) {
                const std::size_t cx = nx.size() > 1 ? cell_of(nx, x) : 0;
                const int xlo = nx[cx];
                const int xhi = nx.size() > 1 ? nx[cx + 1] : xlo;
                const double fx = xhi > xlo ? (static_cast<double>(x) - xlo) / (xhi - xlo) : 0.0;
                const std::size_t col_hi = nx.size() > 1 ? cx + 1 : cx;
                const std::size_t i00 = cy * nx.size() + cx;
                const std::size_t i01 = cy * nx.size() + col_hi;
                const std::size_t i10 = row_hi * nx.size() + cx;
                const std::size_t i11 = row_hi * nx.size() + col_hi;
                const std::size_t out = y * width + x;
                const double tx = (1.0 - fx) * node_x[i00] + fx * node_x[i01];
                const double bx = (1.0 - fx) * node_x[i10] + fx * node_x[i11];
                field.xs[out] = (1.0 - fy) * tx + fy * bx;
                const double ty = (1.0 - fx) * node_y[i00] + fx * node_y[i01];
                const double by = (1.0 - fx) * node_y[i10] + fx * node_y[i11];
                field.ys[out] = (1.0 - fy) * ty + fy * by;
            }
        }
    }, 8);
    return field;
}

ImageBuffer warp_image(const ImageBuffer& src, const DeformationField& field) {
    if (src.empty()) throw DimensionMismatch("warp_image: empty source image");
    if (field.width <= 0 || field.height <= 0 ||
        field.xs.size() != static_cast<std::size_t>(field.width) * field.height)
        throw DimensionMismatch("warp_image: malformed deformation field");

    ImageBuffer out = ImageBuffer::make(field.width, field.height, src.channels);
    const auto& ops = kernels::active();
    parallel_for(0, static_cast<std::size_t>(field.height), [&](std::size_t y0, std::size_t y1) {
        for (std::size_t y = y0; y < y1; ++y) {
            const std::size_t row = y * field.width;
            ops.bilinear_sample(out.data.data() + row * src.channels, src.data.data(),
                                src.width, src.height, src.channels,
                                field.xs.data() + row, field.ys.data() + row, field.width);
        }
    }, 16);
    return out;
}

double landmark_distance(const LandmarkSet& a, const LandmarkSet& b) {
    if (a.points.size() != b.points.size())
        throw LengthMismatch("landmark_distance: sets differ in length");
    double s = 0.0;
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        const double dx = a.points[i].x - b.points[i].x;
        const double dy = a.points[i].y - b.points[i].y;
        s += dx * dx + dy * dy;
    }
    return std::sqrt(s);
}

Similarity fit_similarity(std::span<const Point2> from, std::span<const Point2> to) {
    if (from.size() != to.size())
        throw LengthMismatch("fit_similarity: point sets differ in length");
    const std::size_t n = from.size();
    if (n < 2) throw DegenerateLandmarks("fit_similarity: need at least 2 points");

    double pmx = 0.0, pmy = 0.0, qmx = 0.0, qmy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        pmx += from[i].x;
        pmy += from[i].y;
        qmx += to[i].x;
        qmy += to[i].y;
    }
    pmx /= static_cast<double>(n);
    pmy /= static_cast<double>(n);
    qmx /= static_cast<double>(n);
    qmy /= static_cast<double>(n);

    double sxx = 0.0, sxy = 0.0, syy = 0.0;  // scatter of `from`
    double norm = 0.0, dot = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double px = from[i].x - pmx;
        const double py = from[i].y - pmy;
        const double qx = to[i].x - qmx;
        const double qy = to[i].y - qmy;
        sxx += px * px;
        sxy += px * py;
        syy += py * py;
        // norm accumulates with the same pairing as dot so a fit of a point
        // set onto itself yields the exact identity transform
        norm += px * px + py * py;
        dot += px * qx + py * qy;
        cross += px * qy - py * qx;
    }
    const double tr = 0.5 * (sxx + syy);
    const double disc = std::sqrt(std::max(0.0, 0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy));
    const double lmin = tr - disc;
    const double lmax = tr + disc;
    if (!(lmin > kSingularTol * std::max(lmax, 1.0)))
        throw DegenerateLandmarks("fit_similarity: source landmarks are collinear");

    Similarity t;
    t.a = dot / norm;
    t.b = cross / norm;
    t.tx = qmx - (t.a * pmx - t.b * pmy);
    t.ty = qmy - (t.b * pmx + t.a * pmy);
    return t;
}

ImageBuffer resample_similarity(const ImageBuffer& img, const Similarity& to_crop,
                                int out_size) {
    if (img.empty()) throw DimensionMismatch("resample_similarity: empty image");
    const Similarity inv = to_crop.inverse();
    ImageBuffer out = ImageBuffer::make(out_size, out_size, img.channels);
    std::vector<double> xs(static_cast<std::size_t>(out_size));
    std::vector<double> ys(xs.size());
    const auto& ops = kernels::active();
    for (int y = 0; y < out_size; ++y) {
        for (int x = 0; x < out_size; ++x) {
            const Point2 s = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            xs[static_cast<std::size_t>(x)] = s.x;
            ys[static_cast<std::size_t>(x)] = s.y;
        }
        ops.bilinear_sample(out.data.data() +
                                static_cast<std::size_t>(y) * out_size * img.channels,
                            img.data.data(), img.width, img.height, img.channels,
                            xs.data(), ys.data(), out_size);
    }
    return out;
}

AlignResult align_face(const ImageBuffer& img, const LandmarkSet& lms,
                       const LandmarkSet& templ, int out_size) {
    if (img.empty()) throw DimensionMismatch("align_face: empty image");
    if (lms.points.size() != templ.points.size())
        throw LengthMismatch("align_face: landmark/template size mismatch");

    AlignResult res;
    res.transform = fit_similarity(lms.points, templ.points);
    res.image = resample_similarity(img, res.transform, out_size);
    res.landmarks.points.reserve(lms.points.size());
    for (const Point2& p : lms.points) res.landmarks.points.push_back(res.transform.apply(p));
    return res;
}

ImageBuffer render_landmark_mask(const LandmarkSet& lms, int width, int height,
                                 double radius) {
    if (radius < 0.0) throw Error("render_landmark_mask: negative radius");
    ImageBuffer mask = ImageBuffer::make(width, height, 1);
    const double r2 = radius * radius;
    for (const Point2& p : lms.points) {
        const int x0 = std::max(0, static_cast<int>(std::ceil(p.x - radius)));
        const int x1 = std::min(width - 1, static_cast<int>(std::floor(p.x + radius)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(p.y - radius)));
        const int y1 = std::min(height - 1, static_cast<int>(std::floor(p.y + radius)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - p.x;
                const double dy = y - p.y;
                if (dx * dx + dy * dy <= r2) mask.at(x, y, 0) = 1.0f;
            }
        }
    }
    return mask;
}

const LandmarkSet& canonical_template() {
    static const LandmarkSet t{
        std::vector<Point2>(kTemplate512, kTemplate512 + LandmarkSet::kCount)};
    return t;
}

LandmarkSet scaled_template(int out_size) {
    const double s = static_cast<double>(out_size) / 512.0;
    LandmarkSet t = canonical_template();
    for (Point2& p : t.points) {
        p.x *= s;
        p.y *= s;
    }
    return t;
}

}  // namespace kfr
