#ifndef IDFORGE_IO_HPP
#define IDFORGE_IO_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "idforge/diffusion.hpp"
#include "idforge/discovery.hpp"
#include "idforge/injection.hpp"
#include "idforge/matrix.hpp"

namespace idforge {

// On-disk formats:
//   EMB text:   "EMB v1 <rows> <cols>", rows of space-separated reals,
//               optional trailing "LABELS <0/1 ...>" line.
//   EMB binary: magic "EMBF", version byte 0x01, u32-LE rows, cols, then
//               rows*cols f32-LE row-major.
//   Latent grid: the binary embedding format with rows = cols = side.
//   Mask:       binary PGM (P5), maxval 255, value >= 128 -> bit 1.

struct LabeledEmbeddings {
    Matrix values;
    std::optional<std::vector<std::uint8_t>> labels;
};

inline void write_embeddings_text(const std::string& path, const Matrix& m,
                                  const std::optional<std::vector<std::uint8_t>>& labels = {}) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open for writing: " + path);
    f << "EMB v1 " << m.rows() << ' ' << m.cols() << '\n';
    f << std::setprecision(17);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) f << ' ';
            f << m(r, c);
        }
        f << '\n';
    }
    if (labels) {
        f << "LABELS";
        for (auto l : *labels) f << ' ' << static_cast<int>(l);
        f << '\n';
    }
    if (!f) throw ParseError("write failed: " + path);
}

inline LabeledEmbeddings read_embeddings_text(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line))
        throw ParseError(path + ":1: empty file");
    std::istringstream head(line);
    std::string magic, version;
    std::size_t rows = 0, cols = 0;
    if (!(head >> magic >> version >> rows >> cols) || magic != "EMB" || version != "v1")
        throw ParseError(path + ":1: expected header 'EMB v1 <rows> <cols>'");
    if (rows == 0 || cols == 0)
        throw ParseError(path + ":1: zero rows or cols");

    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!std::getline(f, line))
            throw ParseError(path + ":" + std::to_string(r + 2) + ": missing row");
        std::istringstream ls(line);
        for (std::size_t c = 0; c < cols; ++c) {
            if (!(ls >> m(r, c)))
                throw ParseError(path + ":" + std::to_string(r + 2) + ": bad value at column " +
                                 std::to_string(c + 1));
        }
    }
    LabeledEmbeddings out;
    out.values = std::move(m);
    if (std::getline(f, line) && !line.empty()) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag != "LABELS")
            throw ParseError(path + ":" + std::to_string(rows + 2) +
                             ": expected LABELS line, got '" + tag + "'");
        std::vector<std::uint8_t> labels(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            int v = 0;
            if (!(ls >> v) || (v != 0 && v != 1))
                throw ParseError(path + ":" + std::to_string(rows + 2) +
                                 ": bad label at position " + std::to_string(r + 1));
            labels[r] = static_cast<std::uint8_t>(v);
        }
        out.labels = std::move(labels);
    }
    return out;
}

namespace detail {

inline void put_u32le(std::ostream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32le(std::istream& f, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw ParseError(path + ": truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32le(std::ostream& f, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32le(f, bits);
}

inline float get_f32le(std::istream& f, const std::string& path, std::size_t index) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw ParseError(path + ": truncated at value " + std::to_string(index));
    std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                         (static_cast<std::uint32_t>(b[1]) << 8) |
                         (static_cast<std::uint32_t>(b[2]) << 16) |
                         (static_cast<std::uint32_t>(b[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace detail

inline void write_embeddings_binary(const std::string& path, const Matrix& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open for writing: " + path);
    f.write("EMBF", 4);
    f.put('\x01');
    detail::put_u32le(f, static_cast<std::uint32_t>(m.rows()));
    detail::put_u32le(f, static_cast<std::uint32_t>(m.cols()));
    for (double x : m.values()) detail::put_f32le(f, static_cast<float>(x));
    if (!f) throw ParseError("write failed: " + path);
}

inline Matrix read_embeddings_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open: " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "EMBF", 4) != 0)
        throw ParseError(path + ": offset 0: bad magic, expected EMBF");
    const int version = f.get();
    if (version != 0x01)
        throw ParseError(path + ": offset 4: unsupported version " + std::to_string(version));
    const std::uint32_t rows = detail::get_u32le(f, path);
    const std::uint32_t cols = detail::get_u32le(f, path);
    if (rows == 0 || cols == 0)
        throw ParseError(path + ": zero rows or cols");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * cols; ++i)
        m.values()[i] = detail::get_f32le(f, path, i);
    return m;
}

inline void write_latent_grid(const std::string& path, const LatentGrid& g) {
    Matrix m(g.side, g.side, g.v);
    write_embeddings_binary(path, m);
}

inline LatentGrid read_latent_grid(const std::string& path) {
    Matrix m = read_embeddings_binary(path);
    if (m.rows() != m.cols())
        throw ParseError(path + ": latent grid must be square");
    return LatentGrid(m.rows(), m.values());
}

inline void write_mask_pgm(const std::string& path, const Mask& mask) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open for writing: " + path);
    f << "P5\n" << mask.side << ' ' << mask.side << "\n255\n";
    for (auto b : mask.bits) f.put(b ? '\xff' : '\x00');
    if (!f) throw ParseError("write failed: " + path);
}

inline Mask read_mask_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open: " + path);
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P5") throw ParseError(path + ": expected P5 PGM");
    if (w != h) throw ParseError(path + ": mask must be square");
    if (maxval != 255) throw ParseError(path + ": expected maxval 255");
    f.get(); // single whitespace after header
    Mask m(w);
    for (std::size_t i = 0; i < w * h; ++i) {
        const int v = f.get();
        if (v < 0) throw ParseError(path + ": truncated pixel data at " + std::to_string(i));
        m.bits[i] = v >= 128 ? 1 : 0;
    }
    return m;
}

// ---------------------------------------------------------------------------
// JSON documents

struct StorySpec {
    std::vector<std::string> characters; // descriptions; first word is the token
    std::vector<std::string> prompts;
    std::int64_t seed = 0;

    static std::string token_of(const std::string& description) {
        std::string tok;
        for (char ch : description) {
            if (std::isalnum(static_cast<unsigned char>(ch))) tok.push_back(ch);
            else if (!tok.empty()) break;
        }
        return tok;
    }

    void validate() const {
        if (prompts.empty()) throw ConfigError("story: need at least one prompt");
        for (const auto& p : prompts) {
            for (const auto& tok : character_tokens(p)) {
                bool known = false;
                for (const auto& c : characters)
                    if (token_of(c) == tok) { known = true; break; }
                if (!known)
                    throw ConfigError("story: prompt references unknown character '" + tok + "'");
            }
        }
    }
};

inline StorySpec read_story(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    StorySpec s;
    try {
        s.characters = j.at("characters").get<std::vector<std::string>>();
        s.prompts = j.at("prompts").get<std::vector<std::string>>();
        s.seed = j.at("seed").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    s.validate();
    return s;
}

inline void write_story(const std::string& path, const StorySpec& s) {
    nlohmann::json j{{"characters", s.characters}, {"prompts", s.prompts}, {"seed", s.seed}};
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open for writing: " + path);
    f << j.dump(2) << '\n';
}

inline nlohmann::json filter_report_to_json(const FilterReport& r) {
    nlohmann::json j;
    j["initial_count"] = r.initial_count;
    j["retained_count"] = r.retained_count;
    j["retained_fraction"] = r.retained_fraction;
    j["final_embedding"] = r.final_embedding;
    j["iterations"] = nlohmann::json::array();
    for (const auto& it : r.iterations) {
        j["iterations"].push_back({{"kept_ids", it.kept_ids},
                                   {"removed_ids", it.removed_ids},
                                   {"errors", it.errors}});
    }
    return j;
}

inline FilterReport filter_report_from_json(const nlohmann::json& j) {
    FilterReport r;
    r.initial_count = j.at("initial_count").get<std::size_t>();
    r.retained_count = j.at("retained_count").get<std::size_t>();
    r.retained_fraction = j.at("retained_fraction").get<double>();
    r.final_embedding = j.at("final_embedding").get<std::vector<double>>();
    for (const auto& it : j.at("iterations")) {
        FilterIteration fi;
        fi.kept_ids = it.at("kept_ids").get<std::vector<std::size_t>>();
        fi.removed_ids = it.at("removed_ids").get<std::vector<std::size_t>>();
        fi.errors = it.at("errors").get<std::vector<double>>();
        r.iterations.push_back(std::move(fi));
    }
    return r;
}

} // namespace idforge

#endif
