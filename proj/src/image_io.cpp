#include "fruitnet/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include "fruitnet/dataset.hpp"

namespace fruitnet {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageU8 decode_png_file(const std::filesystem::path& file, std::FILE* fp) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: out of memory decoding " + file.string());
    }

    ImageU8 img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: failed to decode " + file.string());
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    if (png_get_rowbytes(png, info) != img.width * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: unexpected row layout in " + file.string());
    }
    img.rgb.resize(img.width * img.height * 3);
    rows.resize(img.height);
    for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.rgb.data() + y * img.width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

struct JpegErr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_trampoline(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErr*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

ImageU8 decode_jpeg_file(const std::filesystem::path& file, std::FILE* fp) {
    jpeg_decompress_struct cinfo;
    JpegErr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_trampoline;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("jpeg: failed to decode " + file.string());
    }

    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    ImageU8 img;
    img.width = cinfo.output_width;
    img.height = cinfo.output_height;
    img.rgb.resize(img.width * img.height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.rgb.data() + cinfo.output_scanline * img.width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

bool iequals(std::string a, const std::string& b) {
    std::transform(a.begin(), a.end(), a.begin(), ::tolower);
    return a == b;
}

bool is_image_ext(const std::filesystem::path& p) {
    const std::string ext = p.extension().string();
    return iequals(ext, ".png") || iequals(ext, ".jpg") || iequals(ext, ".jpeg");
}

}  // namespace

ImageU8 decode_image(const std::filesystem::path& file) {
    FilePtr fp(std::fopen(file.string().c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open image file " + file.string());

    unsigned char magic[3] = {0, 0, 0};
    const std::size_t got = std::fread(magic, 1, 3, fp.get());
    std::rewind(fp.get());
    if (got == 3 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N')
        return decode_png_file(file, fp.get());
    if (got == 3 && magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF)
        return decode_jpeg_file(file, fp.get());
    throw std::runtime_error("unrecognized image format in " + file.string() +
                             " (PNG and baseline JPEG are supported)");
}

void encode_png(const std::filesystem::path& file, const ImageU8& img) {
    if (img.rgb.size() != img.width * img.height * 3)
        throw std::invalid_argument("encode_png: buffer does not match dimensions");
    FilePtr fp(std::fopen(file.string().c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open " + file.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: out of memory encoding " + file.string());
    }
    std::vector<png_bytep> rows(img.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: failed to encode " + file.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.rgb.data() + y * img.width * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<float> to_chw_normalized(const ImageU8& img) {
    std::vector<float> chw(3 * img.height * img.width);
    const std::size_t hw = img.height * img.width;
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                chw[c * hw + y * img.width + x] =
                    static_cast<float>(img.rgb[(y * img.width + x) * 3 + c]) / 255.0f;
    return chw;
}

std::vector<float> resize_bilinear_chw(const std::vector<float>& chw, std::size_t channels,
                                       std::size_t in_h, std::size_t in_w, std::size_t out_h,
                                       std::size_t out_w) {
    if (chw.size() != channels * in_h * in_w)
        throw std::invalid_argument("resize_bilinear_chw: buffer/shape mismatch");
    if (in_h == out_h && in_w == out_w) return chw;

    std::vector<float> out(channels * out_h * out_w);
    const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
    for (std::size_t c = 0; c < channels; ++c) {
        const float* plane = chw.data() + c * in_h * in_w;
        float* oplane = out.data() + c * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            const double fy = std::max(0.0, (oy + 0.5) * sy - 0.5);
            const std::size_t y0 = std::min(static_cast<std::size_t>(fy), in_h - 1);
            const std::size_t y1 = std::min(y0 + 1, in_h - 1);
            const float wy = static_cast<float>(fy - static_cast<double>(y0));
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const double fx = std::max(0.0, (ox + 0.5) * sx - 0.5);
                const std::size_t x0 = std::min(static_cast<std::size_t>(fx), in_w - 1);
                const std::size_t x1 = std::min(x0 + 1, in_w - 1);
                const float wx = static_cast<float>(fx - static_cast<double>(x0));
                const float top = plane[y0 * in_w + x0] * (1 - wx) + plane[y0 * in_w + x1] * wx;
                const float bot = plane[y1 * in_w + x0] * (1 - wx) + plane[y1 * in_w + x1] * wx;
                oplane[oy * out_w + ox] = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

Dataset load_image_dir(const std::filesystem::path& root, std::size_t target_size) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root))
        throw std::runtime_error("dataset root is not a directory: " + root.string());

    std::vector<std::string> class_dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
    if (class_dirs.empty())
        throw std::runtime_error("no class directories under " + root.string());
    std::sort(class_dirs.begin(), class_dirs.end());

    Dataset ds;
    ds.channels = 3;
    ds.height = target_size;
    ds.width = target_size;
    ds.class_names = class_dirs;
    ds.source = root.string();

    for (std::size_t c = 0; c < class_dirs.size(); ++c) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(root / class_dirs[c]))
            if (entry.is_regular_file() && is_image_ext(entry.path()))
                files.push_back(entry.path());
        if (files.empty())
            throw std::runtime_error("class directory has no images: " +
                                     (root / class_dirs[c]).string());
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            const ImageU8 img = decode_image(file);
            auto chw = to_chw_normalized(img);
            ds.images.push_back(resize_bilinear_chw(chw, 3, img.height, img.width,
                                                    target_size, target_size));
            ds.labels.push_back(static_cast<int>(c));
        }
    }
    return ds;
}

bool has_split_dirs(const std::filesystem::path& root) {
    return std::filesystem::is_directory(root / "Training") &&
           std::filesystem::is_directory(root / "Test");
}

std::pair<Dataset, Dataset> load_split_dirs(const std::filesystem::path& root,
                                            std::size_t target_size) {
    auto train = load_image_dir(root / "Training", target_size);
    auto test = load_image_dir(root / "Test", target_size);
    if (train.class_names != test.class_names)
        throw std::runtime_error("Training/ and Test/ class directories disagree under " +
                                 root.string());
    return {std::move(train), std::move(test)};
}

void export_dataset(const Dataset& ds, const std::filesystem::path& out_root) {
    namespace fs = std::filesystem;
    validate_dataset(ds);
    fs::create_directories(out_root);
    std::vector<int> counters(ds.num_classes(), 0);
    for (const auto& name : ds.class_names) fs::create_directories(out_root / name);

    const std::size_t hw = ds.height * ds.width;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        ImageU8 img;
        img.width = ds.width;
        img.height = ds.height;
        img.rgb.resize(hw * 3);
        for (std::size_t y = 0; y < ds.height; ++y)
            for (std::size_t x = 0; x < ds.width; ++x)
                for (std::size_t c = 0; c < 3; ++c) {
                    const float v = ds.images[i][c * hw + y * ds.width + x];
                    const float q = std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f;
                    img.rgb[(y * ds.width + x) * 3 + c] = static_cast<unsigned char>(q);
                }
        const int n = counters[static_cast<std::size_t>(ds.labels[i])]++;
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05d.png", n);
        encode_png(out_root / ds.class_names[static_cast<std::size_t>(ds.labels[i])] / name,
                   img);
    }
}

}  // namespace fruitnet
