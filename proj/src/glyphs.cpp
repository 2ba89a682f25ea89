#include "ctrak/glyphs.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "ctrak/rng.hpp"

namespace ctrak {

namespace {

constexpr int kCoarse = 4;           // coarse mask grid
constexpr double kPixelNoise = 0.05; // jitter noise amplitude
constexpr int kMinBits = 5;
constexpr int kMaxBits = 11;
constexpr int kMinHamming = 5;

double texture_value(const GlyphStyle& st, int r, int c) {
    switch (st.texture) {
        case 1: return (r % 2 == 0) ? st.tex_amp : -st.tex_amp;
        case 2: return (c % 2 == 0) ? st.tex_amp : -st.tex_amp;
        case 3: return ((r + c) % 2 == 0) ? st.tex_amp : -st.tex_amp;
        default: return 0.0;
    }
}

}  // namespace

GlyphBank::GlyphBank(int n_shapes, int n_styles, int resolution, std::uint64_t seed)
    : n_shapes_(n_shapes), n_styles_(n_styles), res_(resolution), coarse_(kCoarse) {
    require(n_shapes >= 2 && n_styles >= 2, "GlyphBank: need at least 2 shapes and 2 styles");
    require(resolution % kCoarse == 0 && resolution >= kCoarse,
            "GlyphBank: resolution must be a multiple of 4");
    require(n_shapes <= 256, "GlyphBank: too many shapes for the coarse mask space");

    Rng rng(derive_seed(seed, 0x61F));
    masks_.reserve(static_cast<std::size_t>(n_shapes));
    while (static_cast<int>(masks_.size()) < n_shapes) {
        std::uint32_t mask = static_cast<std::uint32_t>(rng.next_u64() & 0xffffu);
        int bits = std::popcount(mask);
        if (bits < kMinBits || bits > kMaxBits) continue;
        bool ok = true;
        for (std::uint32_t other : masks_) {
            if (std::popcount(mask ^ other) < kMinHamming) {
                ok = false;
                break;
            }
        }
        if (ok) masks_.push_back(mask);
    }

    // Fixed style palette: levels and textures cycle so neighbouring style ids
    // always differ in at least one strong attribute.
    const double bgs[3] = {-0.85, -0.55, -0.25};
    const double fgs[2] = {0.9, 0.6};
    styles_.resize(static_cast<std::size_t>(n_styles));
    for (int s = 0; s < n_styles; ++s) {
        GlyphStyle st;
        st.bg = bgs[s % 3];
        st.fg = fgs[(s / 3) % 2];
        st.texture = s % 4;
        st.tex_amp = 0.18;
        styles_[static_cast<std::size_t>(s)] = st;
    }
}

const GlyphStyle& GlyphBank::style(int style_id) const {
    require(style_id >= 0 && style_id < n_styles_, "GlyphBank: style out of range");
    return styles_[static_cast<std::size_t>(style_id)];
}

bool GlyphBank::mask_at(int shape_id, int r, int c, int dx, int dy) const {
    int cell = res_ / coarse_;
    int rr = r - dy;
    int cc = c - dx;
    if (rr < 0 || cc < 0 || rr >= res_ || cc >= res_) return false;
    int mr = rr / cell;
    int mc = cc / cell;
    return (masks_[static_cast<std::size_t>(shape_id)] >>
            static_cast<unsigned>(mr * coarse_ + mc)) & 1u;
}

Vec GlyphBank::render_template(int shape_id, int style_id, int dx, int dy) const {
    require(shape_id >= 0 && shape_id < n_shapes_, "GlyphBank: shape out of range");
    const GlyphStyle& st = style(style_id);
    Vec img(dim());
    for (int r = 0; r < res_; ++r) {
        for (int c = 0; c < res_; ++c) {
            double v = mask_at(shape_id, r, c, dx, dy) ? st.fg : st.bg + texture_value(st, r, c);
            img[r * res_ + c] = std::clamp(v, -1.0, 1.0);
        }
    }
    return img;
}

Vec GlyphBank::render(const GlyphSpec& spec) const {
    require(spec.resolution == res_, "GlyphBank: spec resolution mismatch");
    Rng rng(derive_seed(spec.jitter_seed, 0x91D));
    int dx = rng.uniform_int(-1, 1);
    int dy = rng.uniform_int(-1, 1);
    Vec img = render_template(spec.shape_id, spec.style_id, dx, dy);
    for (int i = 0; i < dim(); ++i) {
        img[i] = std::clamp(img[i] + rng.uniform(-kPixelNoise, kPixelNoise), -1.0, 1.0);
    }
    return img;
}

OracleClassifier::OracleClassifier(const GlyphBank& bank) {
    for (int shape = 0; shape < bank.n_shapes(); ++shape)
        for (int style = 0; style < bank.n_styles(); ++style)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    templates_.push_back({bank.render_template(shape, style, dx, dy), shape, style});
}

OracleClassifier::Result OracleClassifier::classify(const Vec& x) const {
    Result best{-1, -1, std::numeric_limits<double>::infinity()};
    for (const Template& t : templates_) {
        double d = (x - t.image).squaredNorm();
        if (d < best.distance) best = {t.shape_id, t.style_id, d};
    }
    return best;
}

GlyphDataset generate_dataset(const GlyphBank& bank, int per_cell, std::uint64_t seed) {
    require(per_cell >= 1, "generate_dataset: per_cell must be >= 1");
    GlyphDataset ds;
    ds.n_shapes = bank.n_shapes();
    ds.n_styles = bank.n_styles();
    ds.per_cell = per_cell;
    std::int64_t id = 0;
    for (int shape = 0; shape < bank.n_shapes(); ++shape) {
        for (int style = 0; style < bank.n_styles(); ++style) {
            for (int i = 0; i < per_cell; ++i) {
                GlyphSpec spec;
                spec.shape_id = shape;
                spec.style_id = style;
                spec.resolution = bank.resolution();
                spec.jitter_seed = derive_seed(seed, static_cast<std::uint64_t>(id));
                DataPoint p;
                p.x0 = bank.render(spec);
                p.concept_id = shape;
                p.style_id = style;
                p.sample_id = id++;
                ds.points.push_back(std::move(p));
            }
        }
    }
    return ds;
}

}  // namespace ctrak
