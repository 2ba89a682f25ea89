#ifndef CTRAK_GLYPHS_HPP
#define CTRAK_GLYPHS_HPP

#include <cstdint>
#include <vector>

#include "ctrak/data.hpp"

namespace ctrak {

struct GlyphSpec {
    int shape_id = 0;
    int style_id = 0;
    std::uint64_t jitter_seed = 0;
    int resolution = 16;
};

// Style = background/foreground levels plus a fixed background texture. The
// glyph translates under jitter; the texture stays pinned to the pixel grid.
struct GlyphStyle {
    double bg = -0.8;
    double fg = 0.8;
    int texture = 0;  // 0 none, 1 h-stripes, 2 v-stripes, 3 checker
    double tex_amp = 0.18;
};

// Deterministic renderer for M shapes x S styles of blocky glyphs. Shapes are
// coarse binary masks upsampled to the target resolution, kept pairwise far
// apart in Hamming distance so a template classifier separates them cleanly.
class GlyphBank {
public:
    GlyphBank(int n_shapes, int n_styles, int resolution, std::uint64_t seed);

    int n_shapes() const { return n_shapes_; }
    int n_styles() const { return n_styles_; }
    int resolution() const { return res_; }
    int dim() const { return res_ * res_; }

    Vec render(const GlyphSpec& spec) const;
    // Jitter-free template of one (shape, style) cell.
    Vec render_template(int shape_id, int style_id, int dx = 0, int dy = 0) const;

    const GlyphStyle& style(int style_id) const;

private:
    bool mask_at(int shape_id, int r, int c, int dx, int dy) const;

    int n_shapes_, n_styles_, res_, coarse_;
    std::vector<std::uint32_t> masks_;  // one coarse bitmask per shape
    std::vector<GlyphStyle> styles_;
};

// Nearest-template classifier over shapes, styles, and the jitter translate
// range. This is benchmark ground truth, independent of the learned model.
class OracleClassifier {
public:
    explicit OracleClassifier(const GlyphBank& bank);

    struct Result {
        int shape_id;
        int style_id;
        double distance;
    };
    Result classify(const Vec& x) const;
    int classify_shape(const Vec& x) const { return classify(x).shape_id; }

private:
    struct Template {
        Vec image;
        int shape_id;
        int style_id;
    };
    std::vector<Template> templates_;
};

struct GlyphDataset {
    std::vector<DataPoint> points;
    int n_shapes = 0;
    int n_styles = 0;
    int per_cell = 0;
};

// M x S x per_cell jittered glyphs; sample ids are sequential from 0.
GlyphDataset generate_dataset(const GlyphBank& bank, int per_cell, std::uint64_t seed);

}  // namespace ctrak

#endif
