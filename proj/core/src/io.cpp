#include "tomo/io.hpp"

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <regex>
#include <sstream>

#include "tomo/error.hpp"

namespace tomo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- bytes

template <class T>
T byteswap(T v) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    else return byteswap(v);
}

template <class T>
void put(std::string& out, T v) {
    const auto le = to_little(v);
    char buf[sizeof(T)];
    std::memcpy(buf, &le, sizeof(T));
    out.append(buf, sizeof(T));
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path.string() + "'");
    return std::move(ss).str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("error writing '" + path.string() + "'");
}

std::uint32_t crc_of(const std::string& bytes, std::size_t offset, std::size_t count) {
    uLong crc = crc32(0L, Z_NULL, 0);
    const auto* p = reinterpret_cast<const Bytef*>(bytes.data() + offset);
    while (count > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(count, 1u << 30));
        crc = crc32(crc, p, chunk);
        p += chunk;
        count -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

// ---------------------------------------------------------------- geometry json

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec_from(const json& j, const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw GeometryError(std::string(key) + " must be a 3-vector");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

json geometry_json(const Geometry& g) {
    if (const auto* ig = std::get_if<ImageGeometry>(&g)) {
        json j;
        j["type"] = "image";
        j["voxel_num"] = json::array({ig->voxel_num_x, ig->voxel_num_y, ig->voxel_num_z});
        j["voxel_size"] = json::array({ig->voxel_size_x, ig->voxel_size_y, ig->voxel_size_z});
        j["center_offset"] = vec_json(ig->center_offset);
        j["dimension_labels"] = ig->dimension_labels;
        return j;
    }
    const auto& ag = std::get<AcquisitionGeometry>(g);
    json j;
    j["type"] = "acquisition";
    j["beam"] = std::string(to_string(ag.beam));
    j["source_position"] = vec_json(ag.source_position);
    j["ray_direction"] = vec_json(ag.ray_direction);
    j["detector_position"] = vec_json(ag.detector_position);
    j["detector_direction_x"] = vec_json(ag.detector_direction_x);
    j["detector_direction_y"] = vec_json(ag.detector_direction_y);
    j["rotation_axis_position"] = vec_json(ag.rotation_axis_position);
    j["rotation_axis_direction"] = vec_json(ag.rotation_axis_direction);
    j["angles"] = ag.angles;
    j["angle_unit"] = std::string(to_string(ag.angle_unit));
    j["panel"] = {{"num_pixels", ag.panel.num_pixels},
                  {"pixel_size", ag.panel.pixel_size},
                  {"origin", std::string(to_string(ag.panel.origin))}};
    j["dimension_labels"] = ag.dimension_labels;
    return j;
}

Geometry geometry_from(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "image") {
        ImageGeometry ig;
        const auto n = j.at("voxel_num").get<std::array<std::size_t, 3>>();
        const auto h = j.at("voxel_size").get<std::array<double, 3>>();
        ig.voxel_num_x = n[0];
        ig.voxel_num_y = n[1];
        ig.voxel_num_z = n[2];
        ig.voxel_size_x = h[0];
        ig.voxel_size_y = h[1];
        ig.voxel_size_z = h[2];
        ig.center_offset = vec_from(j, "center_offset");
        ig.dimension_labels = j.at("dimension_labels").get<std::vector<std::string>>();
        ig.validate();
        return ig;
    }
    if (type != "acquisition") throw GeometryError("unknown geometry type '" + type + "'");
    AcquisitionGeometry ag;
    ag.beam = parse_beam_type(j.at("beam").get<std::string>());
    ag.source_position = vec_from(j, "source_position");
    ag.ray_direction = vec_from(j, "ray_direction");
    ag.detector_position = vec_from(j, "detector_position");
    ag.detector_direction_x = vec_from(j, "detector_direction_x");
    ag.detector_direction_y = vec_from(j, "detector_direction_y");
    ag.rotation_axis_position = vec_from(j, "rotation_axis_position");
    ag.rotation_axis_direction = vec_from(j, "rotation_axis_direction");
    ag.angles = j.at("angles").get<std::vector<double>>();
    ag.angle_unit = parse_angle_unit(j.at("angle_unit").get<std::string>());
    const auto& p = j.at("panel");
    ag.panel.num_pixels = p.at("num_pixels").get<std::array<std::size_t, 2>>();
    ag.panel.pixel_size = p.at("pixel_size").get<std::array<double, 2>>();
    ag.panel.origin = parse_panel_origin(p.at("origin").get<std::string>());
    ag.dimension_labels = j.at("dimension_labels").get<std::vector<std::string>>();
    ag.validate();
    return ag;
}

// ---------------------------------------------------------------- tiff

struct TiffReader {
    const std::string& bytes;
    bool little = true;
    std::string name;

    std::uint64_t uint(std::size_t offset, std::size_t width) const {
        if (offset + width > bytes.size()) throw IoError("truncated TIFF file '" + name + "'");
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < width; ++i) {
            const auto b = static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i]));
            v |= little ? b << (8 * i) : b << (8 * (width - 1 - i));
        }
        return v;
    }
};

std::size_t tiff_type_size(std::uint64_t type) {
    switch (type) {
        case 1: case 2: case 6: case 7: return 1;
        case 3: case 8: return 2;
        case 4: case 9: case 11: return 4;
        case 5: case 10: case 12: return 8;
        default: return 0;
    }
}

std::string tiff_bytes(const LabeledArray& img2d) {
    const auto h = static_cast<std::uint32_t>(img2d.shape()[0]);
    const auto w = static_cast<std::uint32_t>(img2d.shape()[1]);
    const std::uint32_t data_bytes = h * w * 4u;
    constexpr std::uint16_t entries = 11;
    const std::uint32_t data_offset = 8u + 2u + 12u * entries + 4u;

    std::string out;
    out.reserve(data_offset + data_bytes);
    out += "II";
    put<std::uint16_t>(out, 42);
    put<std::uint32_t>(out, 8);
    put<std::uint16_t>(out, entries);
    auto entry = [&](std::uint16_t tag, std::uint16_t type, std::uint32_t value) {
        put<std::uint16_t>(out, tag);
        put<std::uint16_t>(out, type);
        put<std::uint32_t>(out, 1);
        if (type == 3) {
            put<std::uint16_t>(out, static_cast<std::uint16_t>(value));
            put<std::uint16_t>(out, 0);
        } else {
            put<std::uint32_t>(out, value);
        }
    };
    entry(256, 4, w);
    entry(257, 4, h);
    entry(258, 3, 32);
    entry(259, 3, 1);
    entry(262, 3, 1);
    entry(273, 4, data_offset);
    entry(277, 3, 1);
    entry(278, 4, h);
    entry(279, 4, data_bytes);
    entry(284, 3, 1);
    entry(339, 3, 3);
    put<std::uint32_t>(out, 0);
    for (double v : img2d.values()) put<float>(out, static_cast<float>(v));
    return out;
}

std::vector<double> parse_tiff(const std::string& bytes, const std::string& name, std::size_t& rows,
                               std::size_t& cols) {
    if (bytes.size() < 8) throw IoError("'" + name + "' is not a TIFF file");
    TiffReader r{bytes, true, name};
    if (bytes.compare(0, 2, "II") == 0) r.little = true;
    else if (bytes.compare(0, 2, "MM") == 0) r.little = false;
    else throw IoError("'" + name + "' is not a TIFF file");
    if (r.uint(2, 2) != 42) throw IoError("'" + name + "' is not a classic TIFF file");
    const std::size_t ifd = r.uint(4, 4);
    const std::size_t count = r.uint(ifd, 2);

    std::map<std::uint64_t, std::vector<std::uint64_t>> tags;
    for (std::size_t e = 0; e < count; ++e) {
        const std::size_t at = ifd + 2 + 12 * e;
        const auto tag = r.uint(at, 2);
        const auto type = r.uint(at + 2, 2);
        const auto n = r.uint(at + 4, 4);
        const std::size_t size = tiff_type_size(type);
        if (size == 0 || size > 4 || type == 2) continue;  // rationals, doubles and text are not needed
        std::size_t base = at + 8;
        if (size * n > 4) base = r.uint(at + 8, 4);
        std::vector<std::uint64_t> values(n);
        for (std::size_t i = 0; i < n; ++i) values[i] = r.uint(base + i * size, size);
        tags[tag] = std::move(values);
    }
    auto scalar = [&](std::uint64_t tag, std::optional<std::uint64_t> fallback) -> std::uint64_t {
        const auto it = tags.find(tag);
        if (it != tags.end() && !it->second.empty()) return it->second[0];
        if (!fallback) throw IoError("TIFF file '" + name + "' lacks tag " + std::to_string(tag));
        return *fallback;
    };
    cols = scalar(256, std::nullopt);
    rows = scalar(257, std::nullopt);
    const auto bits = scalar(258, 1);
    const auto compression = scalar(259, 1);
    const auto samples = scalar(277, 1);
    const auto format = scalar(339, 1);
    if (compression != 1) throw IoError("compressed TIFF '" + name + "' is not supported");
    if (samples != 1) throw IoError("TIFF '" + name + "' is not single-channel");
    if (tags.count(322) != 0) throw IoError("tiled TIFF '" + name + "' is not supported");
    const bool is_float = format == 3;
    if (!((is_float && (bits == 32 || bits == 64)) || (format == 1 && (bits == 8 || bits == 16 || bits == 32))))
        throw IoError("TIFF '" + name + "' has unsupported sample format");
    const auto& offsets = tags[273];
    const auto& counts = tags[279];
    if (offsets.empty() || offsets.size() != counts.size()) throw IoError("TIFF '" + name + "' has no strips");

    std::string data;
    for (std::size_t s = 0; s < offsets.size(); ++s) {
        if (offsets[s] + counts[s] > bytes.size()) throw IoError("truncated TIFF file '" + name + "'");
        data.append(bytes, offsets[s], counts[s]);
    }
    const std::size_t width = bits / 8;
    if (data.size() < rows * cols * width) throw IoError("truncated TIFF pixel data in '" + name + "'");
    const TiffReader d{data, r.little, name};
    std::vector<double> values(rows * cols);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto raw = d.uint(i * width, width);
        if (is_float && bits == 32) values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(raw));
        else if (is_float) values[i] = std::bit_cast<double>(raw);
        else values[i] = static_cast<double>(raw);
    }
    return values;
}

bool wildcard(std::string_view pattern, std::string_view text) {
    std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

// ---------------------------------------------------------------- png

unsigned char clamp_byte(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

// ---------------------------------------------------------------- native

void write_native(const LabeledArray& a, const fs::path& path) {
    std::string payload;
    payload.reserve(a.size() * 8);
    for (double v : a.values()) put<double>(payload, v);

    json header;
    header["schema_version"] = native_schema_version;
    header["shape"] = a.shape();
    header["labels"] = a.labels();
    header["dtype"] = "f64";
    header["byte_order"] = "little";
    header["geometry"] = a.geometry() ? geometry_json(*a.geometry()) : json(nullptr);
    header["payload_bytes"] = payload.size();
    header["crc32"] = crc_of(payload, 0, payload.size());
    const std::string text = header.dump();

    std::string out;
    out.reserve(8 + text.size() + payload.size());
    put<std::uint64_t>(out, text.size());
    out += text;
    out += payload;
    write_file(path, out);
}

LabeledArray read_native(const fs::path& path) {
    const std::string bytes = read_file(path);
    const std::string name = path.string();
    if (bytes.size() < 8) throw IoError("'" + name + "' is too short for a native container");
    const TiffReader r{bytes, true, name};
    const std::uint64_t hlen = r.uint(0, 8);
    if (hlen > bytes.size() - 8) throw IoError("'" + name + "' has a truncated header");

    json header;
    try {
        header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(hlen));
    } catch (const json::exception& e) {
        throw IoError("'" + name + "' has a malformed header: " + e.what());
    }
    try {
        const int version = header.at("schema_version").get<int>();
        if (version != native_schema_version)
            throw IoError("'" + name + "' has unsupported schema version " + std::to_string(version));
        if (header.at("dtype").get<std::string>() != "f64")
            throw IoError("'" + name + "' has unsupported dtype '" + header.at("dtype").get<std::string>() + "'");
        if (header.at("byte_order").get<std::string>() != "little")
            throw IoError("'" + name + "' has unsupported byte order '" +
                          header.at("byte_order").get<std::string>() + "'");
        auto shape = header.at("shape").get<std::vector<std::size_t>>();
        auto labels = header.at("labels").get<std::vector<std::string>>();
        std::optional<Geometry> geometry;
        if (!header.at("geometry").is_null()) geometry = geometry_from(header.at("geometry"));

        std::size_t count = 1;
        for (auto s : shape) count *= s;
        const std::size_t payload = bytes.size() - 8 - hlen;
        if (payload < count * 8) throw IoError("'" + name + "' has a truncated payload");
        if (payload > count * 8) throw IoError("'" + name + "' has trailing bytes after the payload");
        if (header.at("payload_bytes").get<std::size_t>() != payload)
            throw IoError("'" + name + "' payload size disagrees with its header");
        if (crc_of(bytes, 8 + hlen, payload) != header.at("crc32").get<std::uint32_t>())
            throw IoError("'" + name + "' failed its checksum");

        std::vector<double> values(count);
        for (std::size_t i = 0; i < count; ++i)
            values[i] = std::bit_cast<double>(r.uint(8 + hlen + 8 * i, 8));
        return LabeledArray(ArraySpec(std::move(labels), std::move(shape), std::move(geometry)), std::move(values));
    } catch (const json::exception& e) {
        throw IoError("'" + name + "' has an invalid header: " + e.what());
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw IoError("'" + name + "' has an inconsistent header: " + e.what());
    }
}

// ---------------------------------------------------------------- tiff stack

std::vector<fs::path> write_tiff_stack(const LabeledArray& a, const fs::path& dir, std::string_view axis,
                                       std::string_view prefix) {
    if (a.ndim() != 2 && a.ndim() != 3)
        throw ShapeError("TIFF stacks need a 2-D or 3-D array, got " + a.spec().describe());
    const std::size_t ax = a.axis_index(axis);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    std::vector<fs::path> written;
    const std::size_t n = a.shape()[ax];
    for (std::size_t i = 0; i < n; ++i) {
        LabeledArray slice = a.get_slice(axis, i);
        if (slice.ndim() == 1) {
            const std::vector<double> row(slice.values().begin(), slice.values().end());
            slice = LabeledArray(ArraySpec({"row", slice.labels()[0]}, {1, row.size()}), row);
        }
        char file[64];
        std::snprintf(file, sizeof file, "_%04zu.tiff", i);
        const fs::path path = dir / (std::string(prefix) + file);
        write_file(path, tiff_bytes(slice));
        written.push_back(path);
    }
    return written;
}

LabeledArray read_tiff(const fs::path& path, const std::vector<std::string>& labels) {
    if (labels.size() != 2) throw ShapeError("a single TIFF image needs two labels");
    std::size_t rows = 0, cols = 0;
    auto values = parse_tiff(read_file(path), path.string(), rows, cols);
    return LabeledArray(ArraySpec(labels, {rows, cols}), std::move(values));
}

LabeledArray read_tiff_stack(const fs::path& dir_or_glob, const std::vector<std::string>& labels,
                             const std::optional<Geometry>& geometry) {
    if (labels.size() != 3) throw ShapeError("a TIFF stack needs three labels");
    fs::path dir = dir_or_glob;
    std::string pattern;
    std::error_code ec;
    if (!fs::is_directory(dir_or_glob, ec)) {
        dir = dir_or_glob.parent_path();
        if (dir.empty()) dir = ".";
        pattern = dir_or_glob.filename().string();
    }
    if (!fs::is_directory(dir, ec)) throw IoError("'" + dir.string() + "' is not a directory");

    std::vector<std::pair<unsigned long long, fs::path>> files;
    static const std::regex trailing_number(R"((\d+)\D*$)");
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string fname = entry.path().filename().string();
        if (pattern.empty()) {
            auto ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
            if (ext != ".tif" && ext != ".tiff") continue;
        } else if (!wildcard(pattern, fname)) {
            continue;
        }
        const std::string stem = entry.path().stem().string();
        std::smatch m;
        if (!std::regex_search(stem, m, trailing_number))
            throw IoError("file name '" + fname + "' has no numeric index for stack ordering");
        files.emplace_back(std::stoull(m[1].str()), entry.path());
    }
    if (files.empty()) throw IoError("no TIFF files match '" + dir_or_glob.string() + "'");
    std::sort(files.begin(), files.end());
    for (std::size_t i = 1; i < files.size(); ++i)
        if (files[i].first == files[i - 1].first)
            throw IoError("files '" + files[i - 1].second.filename().string() + "' and '" +
                          files[i].second.filename().string() + "' share a stack index");

    std::size_t rows = 0, cols = 0;
    std::vector<double> values;
    for (std::size_t i = 0; i < files.size(); ++i) {
        std::size_t r = 0, c = 0;
        auto img = parse_tiff(read_file(files[i].second), files[i].second.string(), r, c);
        if (i == 0) {
            rows = r;
            cols = c;
            values.reserve(files.size() * r * c);
        } else if (r != rows || c != cols) {
            throw IoError("'" + files[i].second.filename().string() + "' is " + std::to_string(r) + "x" +
                          std::to_string(c) + " but the stack is " + std::to_string(rows) + "x" +
                          std::to_string(cols));
        }
        values.insert(values.end(), img.begin(), img.end());
    }
    LabeledArray out(ArraySpec(labels, {files.size(), rows, cols}), std::move(values));
    if (geometry) out.set_geometry(*geometry);
    return out;
}

// ---------------------------------------------------------------- png

std::string_view to_string(Colormap map) { return map == Colormap::gray ? "gray" : "hot"; }

Colormap parse_colormap(std::string_view text) {
    if (text == "gray") return Colormap::gray;
    if (text == "hot") return Colormap::hot;
    throw DomainError("unknown colormap '" + std::string(text) + "' (expected gray or hot)");
}

std::array<unsigned char, 3> colormap_entry(Colormap map, unsigned index) {
    const double t = static_cast<double>(std::min(index, 255u)) / 255.0;
    if (map == Colormap::gray) {
        const auto g = clamp_byte(t);
        return {g, g, g};
    }
    return {clamp_byte(3.0 * t), clamp_byte(3.0 * t - 1.0), clamp_byte(3.0 * t - 2.0)};
}

void export_png_heatmap(const LabeledArray& a, const fs::path& path, double lo, double hi, Colormap map) {
    if (a.ndim() != 2) throw ShapeError("PNG export needs a 2-D array, got " + a.spec().describe());
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
        throw DomainError("PNG value range needs finite lo < hi");
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    if (rows == 0 || cols == 0) throw ShapeError("PNG export of an empty array");

    std::array<std::array<unsigned char, 3>, 256> lut;
    for (unsigned i = 0; i < 256; ++i) lut[i] = colormap_entry(map, i);
    std::vector<unsigned char> pixels(rows * cols * 3);
    for (std::size_t i = 0; i < rows * cols; ++i) {
        const double v = a[i];
        unsigned idx = 0;
        if (!std::isnan(v)) {
            const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
            idx = static_cast<unsigned>(std::lround(t * 255.0));
        }
        std::copy(lut[idx].begin(), lut[idx].end(), pixels.begin() + static_cast<std::ptrdiff_t>(3 * i));
    }

    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (fp == nullptr) throw IoError("cannot open '" + path.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng initialisation failed");
    }
    std::vector<png_bytep> row_ptrs(rows);
    for (std::size_t r = 0; r < rows; ++r) row_ptrs[r] = pixels.data() + r * cols * 3;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng failed writing '" + path.string() + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fclose(fp) != 0) throw IoError("error closing '" + path.string() + "'");
}

// ---------------------------------------------------------------- geometry text

std::string geometry_to_json(const Geometry& g, int indent) { return geometry_json(g).dump(indent); }

Geometry geometry_from_json(std::string_view text) {
    try {
        return geometry_from(json::parse(text));
    } catch (const json::exception& e) {
        throw GeometryError(std::string("invalid geometry JSON: ") + e.what());
    }
}

}  // namespace tomo
