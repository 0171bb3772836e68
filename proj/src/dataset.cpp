#include "fruitnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace fruitnet {

void validate_dataset(const Dataset& ds) {
    if (ds.images.size() != ds.labels.size())
        throw std::invalid_argument("dataset: images/labels length mismatch");
    if (ds.class_names.empty()) throw std::invalid_argument("dataset: no classes");
    if (!std::is_sorted(ds.class_names.begin(), ds.class_names.end()))
        throw std::invalid_argument("dataset: class names must be sorted");
    const std::size_t elems = ds.image_elems();
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        if (ds.images[i].size() != elems)
            throw std::invalid_argument("dataset: image " + std::to_string(i) +
                                        " has wrong element count");
        if (ds.labels[i] < 0 ||
            static_cast<std::size_t>(ds.labels[i]) >= ds.class_names.size())
            throw std::invalid_argument("dataset: label out of range at " + std::to_string(i));
    }
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           std::uint64_t epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Prng prng = derive_stream(seed, epoch, Stream::shuffle);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = prng.next_below(i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
    if (spec.mode == SplitMode::directory_given)
        throw std::invalid_argument(
            "split: directory_given datasets are pre-split at load time");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw std::invalid_argument("split: train_fraction must be in (0,1)");
    validate_dataset(ds);

    const std::size_t k = ds.num_classes();
    std::vector<std::vector<std::size_t>> per_class(k);
    for (std::size_t i = 0; i < ds.size(); ++i)
        per_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    Prng prng(spec.seed);
    std::vector<char> in_train(ds.size(), 0);
    for (std::size_t c = 0; c < k; ++c) {
        auto& idx = per_class[c];
        if (idx.size() < 2)
            throw std::invalid_argument("split: class '" + ds.class_names[c] +
                                        "' has fewer than 2 samples");
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[prng.next_below(i)]);
        const auto n_train = static_cast<std::size_t>(
            std::llround(spec.train_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < idx.size(); ++i) in_train[idx[i]] = i < n_train;
    }

    Dataset train, test;
    for (Dataset* side : {&train, &test}) {
        side->channels = ds.channels;
        side->height = ds.height;
        side->width = ds.width;
        side->class_names = ds.class_names;
        side->source = ds.source;
    }
    train.source += " [train split]";
    test.source += " [test split]";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Dataset& side = in_train[i] ? train : test;
        side.images.push_back(ds.images[i]);
        side.labels.push_back(ds.labels[i]);
    }
    return {std::move(train), std::move(test)};
}

namespace {

// h in [0,1); s, v in [0,1]
void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
    const double hh = h * 6.0;
    const int sector = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1 - s);
    const double q = v * (1 - s * f);
    const double t = v * (1 - s * (1 - f));
    switch (sector) {
        case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
        case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
        case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
        case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
        case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
        default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
    }
}

}  // namespace

Dataset synth_dataset(int classes, int per_class, int size, std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("synth_dataset: need at least 2 classes");
    if (per_class < 1 || size < 4)
        throw std::invalid_argument("synth_dataset: per_class must be >= 1 and size >= 4");

    Dataset ds;
    ds.channels = 3;
    ds.height = static_cast<std::size_t>(size);
    ds.width = static_cast<std::size_t>(size);
    ds.source = "synthetic(classes=" + std::to_string(classes) +
                ", per_class=" + std::to_string(per_class) + ", size=" + std::to_string(size) +
                ", seed=" + std::to_string(seed) + ")";
    std::size_t digits = 1;
    for (int c = classes - 1; c >= 10; c /= 10) ++digits;
    for (int c = 0; c < classes; ++c) {
        const std::string name = std::to_string(c);
        ds.class_names.push_back("class_" + std::string(digits - name.size(), '0') + name);
    }

    Prng prng = derive_stream(seed, 0, Stream::synth);
    const std::size_t s = static_cast<std::size_t>(size);
    const std::size_t side = s / 2;
    for (int c = 0; c < classes; ++c) {
        const double hue = static_cast<double>(c) / classes;
        double bg[3], fg[3];
        hsv_to_rgb(hue, 0.35, 0.35, bg);
        hsv_to_rgb(hue, 0.9, 0.95, fg);
        for (int i = 0; i < per_class; ++i) {
            std::vector<float> img(3 * s * s);
            const std::size_t top = prng.next_below(s - side + 1);
            const std::size_t left = prng.next_below(s - side + 1);
            for (std::size_t ch = 0; ch < 3; ++ch)
                for (std::size_t y = 0; y < s; ++y)
                    for (std::size_t x = 0; x < s; ++x) {
                        const bool inside = y >= top && y < top + side && x >= left &&
                                            x < left + side;
                        const double v =
                            (inside ? fg[ch] : bg[ch]) + prng.uniform(-0.05, 0.05);
                        img[(ch * s + y) * s + x] =
                            static_cast<float>(std::clamp(v, 0.0, 1.0));
                    }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(c);
        }
    }
    return ds;
}

std::uint64_t dataset_digest(const Dataset& ds) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto feed = [&h](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 0x100000001B3ULL;
        }
    };
    for (const auto& name : ds.class_names) feed(name.data(), name.size());
    for (int label : ds.labels) feed(&label, sizeof(label));
    for (const auto& img : ds.images) feed(img.data(), img.size() * sizeof(float));
    return h;
}

}  // namespace fruitnet
