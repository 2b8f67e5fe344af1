#pragma once

#include <span>
#include <vector>

#include "kfr/errors.hpp"

namespace kfr {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }

// 68 facial landmark points in pixel coordinates, origin top-left.
struct LandmarkSet {
    static constexpr int kCount = 68;

    std::vector<Point2> points;

    LandmarkSet() = default;
    explicit LandmarkSet(std::vector<Point2> pts) : points(std::move(pts)) {}

    // Throws LengthMismatch unless exactly 68 finite points.
    void validate() const;
    bool valid() const noexcept;
};

// H x W x C raster, float samples in [0,1], row-major, channel-interleaved.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    static ImageBuffer make(int w, int h, int c, float fill = 0.0f);

    bool empty() const { return data.empty(); }
    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }
    float at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

// Per-pixel source coordinates for backward warping, stored as planes so a
// row can be handed to the sampling kernel directly.
struct DeformationField {
    int width = 0;
    int height = 0;
    std::vector<double> xs;  // xs[y*width + x] = source x for output pixel (x, y)
    std::vector<double> ys;
};

// Similarity transform q = [a -b; b a] p + t.
struct Similarity {
    double a = 1.0, b = 0.0, tx = 0.0, ty = 0.0;

    Point2 apply(Point2 p) const {
        return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty};
    }
    double scale() const;
    Similarity inverse() const;
};

struct AlignResult {
    ImageBuffer image;
    LandmarkSet landmarks;
    Similarity transform;  // maps original image coordinates to crop coordinates
};

// Moving-least-squares affine deformation: evaluates the closed-form f(v)
// = (v - p*) M + q*, where M minimizes the weighted least-squares problem
// with weights 1/|p_i - v|^2. Queries within 1e-8 px of a control point
// return the corresponding target point.
Point2 mls_deform_point(Point2 v, std::span<const Point2> p, std::span<const Point2> q);

// Backward-mapping field for warping the reference image into the degraded
// geometry: offsets[u] = mls_deform_point(u, q, p) (roles swapped), evaluated
// on a grid of spacing grid_step and bilinearly interpolated in between.
// grid_step 1 evaluates every pixel exactly.
DeformationField mls_build_field(std::span<const Point2> p, std::span<const Point2> q,
                                 int width, int height, int grid_step);

// Bilinear backward warp with clamp-to-edge sampling.
ImageBuffer warp_image(const ImageBuffer& src, const DeformationField& field);

// sqrt of the summed squared point distances between two equal-length sets.
double landmark_distance(const LandmarkSet& a, const LandmarkSet& b);

// Least-squares similarity transform mapping `from` onto `to`.
Similarity fit_similarity(std::span<const Point2> from, std::span<const Point2> to);

// Resamples img into an out_size x out_size crop through a known
// image-to-crop transform (backward bilinear, clamp-to-edge).
ImageBuffer resample_similarity(const ImageBuffer& img, const Similarity& to_crop,
                                int out_size);

// Crops and aligns a face by fitting lms onto the template (defined in the
// out_size x out_size canonical frame) and resampling.
AlignResult align_face(const ImageBuffer& img, const LandmarkSet& lms,
                       const LandmarkSet& templ, int out_size);

// Single-channel mask, 1.0 within `radius` (Euclidean) of any landmark.
ImageBuffer render_landmark_mask(const LandmarkSet& lms, int width, int height,
                                 double radius);

// Mean 68-point configuration in a 512x512 frame (same data as
// data/mean_face_68.txt).
const LandmarkSet& canonical_template();

// Canonical template scaled uniformly to an out_size x out_size frame.
LandmarkSet scaled_template(int out_size);

}  // namespace kfr
