#include "fruitnet/curves_svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace fruitnet {

namespace {

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

struct Panel {
    std::string name;
    double x0, y0, w, h;  // pixel box of the plot area
    double xmin, xmax, ymin, ymax;

    double sx(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
    double sy(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

void emit_axes(std::string& svg, const Panel& p, const std::string& ylabel) {
    svg += "  <rect x=\"" + px(p.x0) + "\" y=\"" + px(p.y0) + "\" width=\"" + px(p.w) +
           "\" height=\"" + px(p.h) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    // x ticks on whole epochs, at most 8 labels
    const int epochs = static_cast<int>(p.xmax);
    const int step = std::max(1, (epochs + 7) / 8);
    for (int e = 1; e <= epochs; e += step) {
        const double x = p.sx(e);
        svg += "  <line x1=\"" + px(x) + "\" y1=\"" + px(p.y0 + p.h) + "\" x2=\"" + px(x) +
               "\" y2=\"" + px(p.y0 + p.h + 4) + "\" stroke=\"#444\"/>\n";
        svg += "  <text x=\"" + px(x) + "\" y=\"" + px(p.y0 + p.h + 16) +
               "\" font-size=\"10\" text-anchor=\"middle\">" + std::to_string(e) + "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        const double y = p.ymin + (p.ymax - p.ymin) * i / 4.0;
        const double ypx = p.sy(y);
        svg += "  <line x1=\"" + px(p.x0 - 4) + "\" y1=\"" + px(ypx) + "\" x2=\"" + px(p.x0) +
               "\" y2=\"" + px(ypx) + "\" stroke=\"#444\"/>\n";
        svg += "  <text x=\"" + px(p.x0 - 7) + "\" y=\"" + px(ypx + 3) +
               "\" font-size=\"10\" text-anchor=\"end\">" + num(y) + "</text>\n";
    }
    svg += "  <text x=\"" + px(p.x0 + p.w / 2) + "\" y=\"" + px(p.y0 + p.h + 32) +
           "\" font-size=\"11\" text-anchor=\"middle\">epoch</text>\n";
    svg += "  <text x=\"" + px(p.x0 - 34) + "\" y=\"" + px(p.y0 + p.h / 2) +
           "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 " +
           px(p.x0 - 34) + " " + px(p.y0 + p.h / 2) + ")\">" + ylabel + "</text>\n";
}

void emit_series(std::string& svg, const Panel& p, const std::string& id,
                 const std::string& color, const TrainHistory& history,
                 double EpochStats::* field) {
    svg += "  <polyline id=\"" + id + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (i) svg += ' ';
        svg += px(p.sx(history[i].epoch)) + "," + px(p.sy(history[i].*field));
    }
    svg += "\"/>\n";
}

void emit_legend(std::string& svg, const Panel& p, const char* train_label,
                 const char* test_label, const char* train_color, const char* test_color) {
    const double lx = p.x0 + 8, ly = p.y0 + 12;
    svg += "  <line x1=\"" + px(lx) + "\" y1=\"" + px(ly) + "\" x2=\"" + px(lx + 18) +
           "\" y2=\"" + px(ly) + "\" stroke=\"" + train_color + "\" stroke-width=\"1.5\"/>\n";
    svg += "  <text x=\"" + px(lx + 22) + "\" y=\"" + px(ly + 3) + "\" font-size=\"10\">" +
           train_label + "</text>\n";
    svg += "  <line x1=\"" + px(lx) + "\" y1=\"" + px(ly + 14) + "\" x2=\"" + px(lx + 18) +
           "\" y2=\"" + px(ly + 14) + "\" stroke=\"" + test_color +
           "\" stroke-width=\"1.5\"/>\n";
    svg += "  <text x=\"" + px(lx + 22) + "\" y=\"" + px(ly + 17) + "\" font-size=\"10\">" +
           test_label + "</text>\n";
}

std::string panel_group_open(const Panel& p) {
    return "  <g data-panel=\"" + p.name + "\" data-x0=\"" + px(p.x0) + "\" data-y0=\"" +
           px(p.y0) + "\" data-w=\"" + px(p.w) + "\" data-h=\"" + px(p.h) + "\" data-xmin=\"" +
           num(p.xmin) + "\" data-xmax=\"" + num(p.xmax) + "\" data-ymin=\"" + num(p.ymin) +
           "\" data-ymax=\"" + num(p.ymax) + "\">\n";
}

}  // namespace

std::string render_curves_svg(const TrainHistory& history) {
    if (history.empty())
        throw std::invalid_argument("render_curves_svg: history has no rows");

    double max_loss = 0;
    for (const auto& row : history)
        max_loss = std::max({max_loss, row.train_loss, row.test_loss});
    if (max_loss <= 0) max_loss = 1.0;

    const double xmax =
        history.size() == 1 ? history.front().epoch + 0.5 : history.back().epoch;
    const double xmin = history.size() == 1 ? history.front().epoch - 0.5 : history.front().epoch;

    Panel acc{"accuracy", 60, 20, 360, 300, xmin, xmax, 0.0, 1.0};
    Panel loss{"loss", 540, 20, 360, 300, xmin, xmax, 0.0, max_loss * 1.05};

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"370\" "
           "viewBox=\"0 0 960 370\" font-family=\"sans-serif\">\n";
    svg += "  <rect width=\"960\" height=\"370\" fill=\"white\"/>\n";

    svg += panel_group_open(acc);
    emit_axes(svg, acc, "accuracy");
    emit_series(svg, acc, "train_acc", "#1f77b4", history, &EpochStats::train_acc);
    emit_series(svg, acc, "test_acc", "#d62728", history, &EpochStats::test_acc);
    emit_legend(svg, acc, "train accuracy", "test accuracy", "#1f77b4", "#d62728");
    svg += "  </g>\n";

    svg += panel_group_open(loss);
    emit_axes(svg, loss, "loss");
    emit_series(svg, loss, "train_loss", "#1f77b4", history, &EpochStats::train_loss);
    emit_series(svg, loss, "test_loss", "#d62728", history, &EpochStats::test_loss);
    emit_legend(svg, loss, "train loss", "test loss", "#1f77b4", "#d62728");
    svg += "  </g>\n";

    svg += "</svg>\n";
    return svg;
}

void write_curves_svg(const TrainHistory& history, const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
    os << render_curves_svg(history);
    if (!os) throw std::runtime_error("failed writing " + file.string());
}

}  // namespace fruitnet
