#include "enf/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "enf/binary_io.hpp"
#include "enf/errors.hpp"

namespace enf {

namespace {

std::uint16_t narrow_u16(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint16_t>::max()) throw DataError(std::string(what) + " too large for format");
    return static_cast<std::uint16_t>(v);
}

void put_floats(ByteWriter& w, const Tensor& t) {
    for (double v : t.values()) w.put_f32(static_cast<float>(v));
}

Tensor get_floats(ByteReader& r, std::size_t rows, std::size_t cols) {
    Tensor t = Tensor::matrix(rows, cols);
    for (auto& v : t.values()) v = r.get_f32();
    return t;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::size_t FieldSample::surface_count() const {
    std::size_t n = 0;
    for (auto s : surface) n += s ? 1 : 0;
    return n;
}

void FieldSample::validate() const {
    if (coords.rank() != 2 || input.rank() != 2 || output.rank() != 2) throw DataError("sample fields must be matrices");
    const std::size_t n = coords.rows();
    if (input.rows() != n || output.rows() != n || surface.size() != n) {
        throw DataError("sample fields disagree on point count (" + std::to_string(n) + ")");
    }
    for (const auto* t : {&coords, &input, &output}) {
        if (!t->all_finite()) throw DataError("sample contains non-finite values");
    }
    for (double m : mu)
        if (!std::isfinite(m)) throw DataError("sample global parameters are non-finite");
}

FieldSample FieldSample::subset(const std::vector<std::size_t>& rows) const {
    auto take = [&](const Tensor& t) {
        Tensor out = Tensor::matrix(rows.size(), t.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t c = 0; c < t.cols(); ++c) out(i, c) = t(rows[i], c);
        return out;
    };
    FieldSample s;
    s.coords = take(coords);
    s.input = take(input);
    s.output = take(output);
    s.mu = mu;
    s.surface.reserve(rows.size());
    for (auto r : rows) s.surface.push_back(surface[r]);
    return s;
}

FieldSample FieldSample::rounded_to_float() const {
    FieldSample s = *this;
    s.coords.round_to_float();
    s.input.round_to_float();
    s.output.round_to_float();
    for (auto& m : s.mu) m = static_cast<double>(static_cast<float>(m));
    return s;
}

std::string serialize_sample(const FieldSample& sample) {
    sample.validate();
    ByteWriter w;
    w.put_bytes("ENFD");
    w.put_u32(kDatasetVersion);
    if (sample.size() > std::numeric_limits<std::uint32_t>::max()) throw DataError("too many points for format");
    w.put_u32(static_cast<std::uint32_t>(sample.size()));
    w.put_u16(narrow_u16(sample.dim(), "d"));
    w.put_u16(narrow_u16(sample.input_dim(), "n_a"));
    w.put_u16(narrow_u16(sample.output_dim(), "n_u"));
    w.put_u16(narrow_u16(sample.mu.size(), "l_mu"));
    put_floats(w, sample.coords);
    put_floats(w, sample.input);
    put_floats(w, sample.output);
    for (double m : sample.mu) w.put_f32(static_cast<float>(m));
    for (auto s : sample.surface) w.put_u8(s ? 1 : 0);
    w.put_crc();
    return w.bytes();
}

FieldSample deserialize_sample(std::string bytes) {
    ByteReader r(std::move(bytes));
    if (r.get_bytes(4) != "ENFD") throw LoadError("bad magic, not an ENFD sample", 0);
    const auto version = r.get_u32();
    if (version != kDatasetVersion) throw LoadError("unsupported ENFD version " + std::to_string(version), 4);
    r.verify_trailing_crc();
    const std::size_t n = r.get_u32();
    const std::size_t d = r.get_u16();
    const std::size_t na = r.get_u16();
    const std::size_t nu = r.get_u16();
    const std::size_t lm = r.get_u16();
    if (n == 0 || d == 0 || na == 0 || nu == 0) throw LoadError("ENFD header has a zero extent", r.offset());
    const std::size_t expected = 4 * (n * (d + na + nu) + lm) + n + 4;
    if (r.remaining() != expected) throw LoadError("ENFD payload size does not match header", r.offset());
    FieldSample s;
    s.coords = get_floats(r, n, d);
    s.input = get_floats(r, n, na);
    s.output = get_floats(r, n, nu);
    for (std::size_t k = 0; k < lm; ++k) s.mu.push_back(r.get_f32());
    s.surface.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = r.get_u8();
        if (b > 1) throw LoadError("surface mask byte must be 0 or 1", r.offset() - 1);
        s.surface[i] = b;
    }
    r.expect_only_crc_left();
    return s;
}

void save_sample(const std::filesystem::path& path, const FieldSample& sample) {
    write_file(path, serialize_sample(sample));
}

FieldSample load_sample(const std::filesystem::path& path) {
    try {
        return deserialize_sample(read_file(path));
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.detail(), e.offset());
    }
}

std::string format_manifest(const Manifest& manifest) {
    std::ostringstream os;
    os << "[train]\n";
    for (const auto& p : manifest.train) os << p << '\n';
    os << "[test]\n";
    for (const auto& p : manifest.test) os << p << '\n';
    return os.str();
}

Manifest parse_manifest(const std::string& text) {
    Manifest m;
    std::vector<std::string>* section = nullptr;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line == "[train]") {
            section = &m.train;
        } else if (line == "[test]") {
            section = &m.test;
        } else if (line.front() == '[') {
            throw DataError("manifest line " + std::to_string(lineno) + ": unknown section " + line);
        } else {
            if (!section) throw DataError("manifest line " + std::to_string(lineno) + ": path before any section");
            section->push_back(line);
        }
    }
    return m;
}

Manifest save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
    Manifest m;
    auto write_split = [&](const std::vector<FieldSample>& samples, const char* split, std::vector<std::string>& out) {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "%04zu.enfd", i);
            const std::string rel = std::string(split) + "/" + name;
            save_sample(dir / rel, samples[i]);
            out.push_back(rel);
        }
    };
    write_split(dataset.train, "train", m.train);
    write_split(dataset.test, "test", m.test);
    write_file(dir / kManifestName, format_manifest(m));
    return m;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::filesystem::path manifest_path = path;
    if (std::filesystem::is_directory(path)) manifest_path = path / kManifestName;
    const auto base = manifest_path.parent_path();
    const Manifest m = parse_manifest(read_file(manifest_path));
    Dataset ds;
    for (const auto& p : m.train) ds.train.push_back(load_sample(base / p));
    for (const auto& p : m.test) ds.test.push_back(load_sample(base / p));
    return ds;
}

}  // namespace enf
