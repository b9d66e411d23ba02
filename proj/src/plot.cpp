#include "dmnet/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>

#include "dmnet/error.hpp"
#include "dmnet/image.hpp"

namespace dmnet {

namespace {

struct Color {
    std::uint8_t r, g, b;
};

constexpr Color kWhite{255, 255, 255};
constexpr Color kBlack{30, 30, 30};
constexpr Color kGrid{220, 220, 220};
constexpr Color kBar{70, 120, 180};

constexpr Color kPalette[] = {
    {31, 119, 180}, {255, 127, 14},  {44, 160, 44},  {214, 39, 40},
    {148, 103, 189}, {140, 86, 75},  {227, 119, 194}, {96, 96, 96},
};
constexpr int kPaletteSize = static_cast<int>(sizeof(kPalette) / sizeof(kPalette[0]));

// 5x7 glyphs, one byte per row, low 5 bits used. Letters render uppercase.
const std::uint8_t* glyph(char c) {
    static const std::uint8_t A[7] = {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11};
    static const std::uint8_t B[7] = {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E};
    static const std::uint8_t C[7] = {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E};
    static const std::uint8_t D[7] = {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E};
    static const std::uint8_t E[7] = {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F};
    static const std::uint8_t F[7] = {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10};
    static const std::uint8_t G[7] = {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F};
    static const std::uint8_t H[7] = {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11};
    static const std::uint8_t I[7] = {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E};
    static const std::uint8_t J[7] = {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C};
    static const std::uint8_t K[7] = {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11};
    static const std::uint8_t L[7] = {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F};
    static const std::uint8_t M[7] = {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11};
    static const std::uint8_t N[7] = {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11};
    static const std::uint8_t O[7] = {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E};
    static const std::uint8_t P[7] = {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10};
    static const std::uint8_t Q[7] = {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D};
    static const std::uint8_t R[7] = {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11};
    static const std::uint8_t S[7] = {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E};
    static const std::uint8_t T[7] = {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04};
    static const std::uint8_t U[7] = {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E};
    static const std::uint8_t V[7] = {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04};
    static const std::uint8_t W[7] = {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A};
    static const std::uint8_t X[7] = {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11};
    static const std::uint8_t Y[7] = {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04};
    static const std::uint8_t Z[7] = {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F};
    static const std::uint8_t D0[7] = {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E};
    static const std::uint8_t D1[7] = {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E};
    static const std::uint8_t D2[7] = {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F};
    static const std::uint8_t D3[7] = {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E};
    static const std::uint8_t D4[7] = {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02};
    static const std::uint8_t D5[7] = {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E};
    static const std::uint8_t D6[7] = {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E};
    static const std::uint8_t D7[7] = {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08};
    static const std::uint8_t D8[7] = {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E};
    static const std::uint8_t D9[7] = {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C};
    static const std::uint8_t DOT[7] = {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C};
    static const std::uint8_t DASH[7] = {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00};
    static const std::uint8_t UND[7] = {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F};
    static const std::uint8_t PCT[7] = {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03};
    static const std::uint8_t COL[7] = {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00};
    static const std::uint8_t EQ[7] = {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00};
    static const std::uint8_t SLH[7] = {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10};
    static const std::uint8_t LPAR[7] = {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02};
    static const std::uint8_t RPAR[7] = {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08};
    static const std::uint8_t COMMA[7] = {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08};
    static const std::uint8_t* letters[26] = {A, B, C, D, E, F, G, H, I, J, K, L, M,
                                              N, O, P, Q, R, S, T, U, V, W, X, Y, Z};
    static const std::uint8_t* digits[10] = {D0, D1, D2, D3, D4, D5, D6, D7, D8, D9};
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u >= 'A' && u <= 'Z') return letters[u - 'A'];
    if (u >= '0' && u <= '9') return digits[u - '0'];
    switch (u) {
        case '.': return DOT;
        case '-': return DASH;
        case '_': return UND;
        case '%': return PCT;
        case ':': return COL;
        case '=': return EQ;
        case '/': return SLH;
        case '(': return LPAR;
        case ')': return RPAR;
        case ',': return COMMA;
        default: return nullptr;
    }
}

struct Canvas {
    ImageU8 img;

    Canvas(int w, int h) {
        img.width = w;
        img.height = h;
        img.pixels.assign(static_cast<size_t>(w) * h * 3, 255);
    }

    void set(int x, int y, Color c) {
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
        const size_t i = (static_cast<size_t>(y) * img.width + x) * 3;
        img.pixels[i] = c.r;
        img.pixels[i + 1] = c.g;
        img.pixels[i + 2] = c.b;
    }

    void fill(int x0, int y0, int x1, int y1, Color c) {
        for (int y = std::max(0, y0); y <= std::min(img.height - 1, y1); ++y)
            for (int x = std::max(0, x0); x <= std::min(img.width - 1, x1); ++x) set(x, y, c);
    }

    void hline(int x0, int x1, int y, Color c) { fill(x0, y, x1, y, c); }
    void vline(int x, int y0, int y1, Color c) { fill(x, y0, x, y1, c); }

    void dot(int x, int y, Color c) { fill(x - 1, y - 1, x + 1, y + 1, c); }

    void text(int x, int y, const std::string& s, Color c) {
        for (char ch : s) {
            const std::uint8_t* g = glyph(ch);
            if (g)
                for (int row = 0; row < 7; ++row)
                    for (int col = 0; col < 5; ++col)
                        if (g[row] & (1 << (4 - col))) set(x + col, y + row, c);
            x += 6;
        }
    }

    int text_width(const std::string& s) const { return 6 * static_cast<int>(s.size()); }
};

std::string fmt1(double v) {
    std::ostringstream out;
    out.precision(1);
    out << std::fixed << v;
    return out.str();
}

}  // namespace

void plot_class_bars(const MetricsReport& rep, const std::string& path) {
    const int W = 640, H = 400;
    const int left = 50, right = 20, top = 40, bottom = 40;
    Canvas cv(W, H);

    cv.text(left, 12, "per-class iou (fold " + std::to_string(rep.fold) + ", k=" +
                          std::to_string(rep.k) + ", miou=" + fmt1(rep.miou) + ")",
            kBlack);

    const int x0 = left, x1 = W - right, y0 = top, y1 = H - bottom;
    for (int level = 0; level <= 100; level += 20) {
        const int y = y1 - (y1 - y0) * level / 100;
        cv.hline(x0, x1, y, level == 0 ? kBlack : kGrid);
        const std::string label = std::to_string(level);
        cv.text(x0 - 6 - cv.text_width(label), y - 3, label, kBlack);
    }
    cv.vline(x0, y0, y1, kBlack);

    const int n = static_cast<int>(rep.classes.size());
    if (n > 0) {
        const int slot = (x1 - x0) / n;
        const int bar = std::max(4, slot * 6 / 10);
        for (int i = 0; i < n; ++i) {
            const ClassMetric& c = rep.classes[i];
            const int cx = x0 + slot * i + slot / 2;
            const int h = static_cast<int>(std::lround((y1 - y0) * c.iou / 100.0));
            cv.fill(cx - bar / 2, y1 - h, cx + bar / 2, y1 - 1, kBar);
            const std::string value = fmt1(c.iou);
            cv.text(cx - cv.text_width(value) / 2, y1 - h - 10, value, kBlack);
            std::string name = c.name;
            const size_t max_chars = static_cast<size_t>(std::max(1, slot / 6 - 1));
            if (name.size() > max_chars) name = name.substr(0, max_chars);
            cv.text(cx - cv.text_width(name) / 2, y1 + 6, name, kBlack);
        }
    } else {
        cv.text(x0 + 10, (y0 + y1) / 2, "no classes evaluated", kBlack);
    }
    write_image_png(path, cv.img);
}

void plot_scale_scatter(const MetricsReport& rep, const std::string& path) {
    const int W = 640, H = 400;
    const int left = 50, right = 140, top = 40, bottom = 40;
    Canvas cv(W, H);

    cv.text(left, 12, "iou vs target size (fold " + std::to_string(rep.fold) + ", k=" +
                          std::to_string(rep.k) + ")",
            kBlack);

    double xmax = 0.0;
    for (const auto& p : rep.pairs) xmax = std::max(xmax, p.fg_fraction);
    xmax = std::max(0.05, std::ceil(xmax * 20.0) / 20.0);

    const int x0 = left, x1 = W - right, y0 = top, y1 = H - bottom;
    for (int level = 0; level <= 100; level += 20) {
        const int y = y1 - (y1 - y0) * level / 100;
        cv.hline(x0, x1, y, level == 0 ? kBlack : kGrid);
        const std::string label = std::to_string(level);
        cv.text(x0 - 6 - cv.text_width(label), y - 3, label, kBlack);
    }
    cv.vline(x0, y0, y1, kBlack);
    const int n_ticks = 5;
    for (int t = 0; t <= n_ticks; ++t) {
        const int x = x0 + (x1 - x0) * t / n_ticks;
        cv.vline(x, y1, y1 + 3, kBlack);
        const std::string label = fmt1(100.0 * xmax * t / n_ticks) + "%";
        cv.text(x - cv.text_width(label) / 2, y1 + 6, label, kBlack);
    }
    cv.text((x0 + x1) / 2 - 60, H - 12, "foreground share of query", kBlack);

    std::map<int, Color> color_of;
    for (const auto& c : rep.classes)
        color_of[c.class_id] = kPalette[color_of.size() % kPaletteSize];
    for (const auto& p : rep.pairs) {
        const auto it = color_of.find(p.class_id);
        const Color c = it == color_of.end() ? kBlack : it->second;
        const int x = x0 + static_cast<int>(std::lround((x1 - x0) * p.fg_fraction / xmax));
        const int y = y1 - static_cast<int>(std::lround((y1 - y0) * p.iou / 100.0));
        cv.dot(x, y, c);
    }

    int ly = y0;
    for (const auto& c : rep.classes) {
        cv.fill(x1 + 10, ly, x1 + 18, ly + 6, color_of[c.class_id]);
        cv.text(x1 + 22, ly, c.name, kBlack);
        ly += 12;
    }
    write_image_png(path, cv.img);
}

}  // namespace dmnet
