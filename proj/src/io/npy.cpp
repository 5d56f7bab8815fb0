#include "ptycho/io/npy.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

namespace ptycho::io {
namespace {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

constexpr char kMagic[] = "\x93NUMPY";

std::string shape_tuple(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << shape[i];
        if (shape.size() == 1 || i + 1 < shape.size()) os << ',';
        if (i + 1 < shape.size()) os << ' ';
    }
    os << ')';
    return os.str();
}

void write_raw(const std::filesystem::path& path, const std::string& descr, const std::vector<std::size_t>& shape,
               const void* data, std::size_t bytes) {
    std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': " + shape_tuple(shape) + ", }";
    // Version 1.0 header: 10 fixed bytes + dict, padded with spaces to a multiple of 64, ending in '\n'.
    const std::size_t unpadded = 10 + dict.size() + 1;
    dict.append((64 - unpadded % 64) % 64, ' ');
    dict.push_back('\n');

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out.write(kMagic, 6);
    out.put(1);
    out.put(0);
    const auto len = static_cast<std::uint16_t>(dict.size());
    out.put(static_cast<char>(len & 0xff));
    out.put(static_cast<char>(len >> 8));
    out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::vector<char> read_payload(const std::filesystem::path& path, const NpyHeader& header, std::size_t item_size) {
    std::size_t count = 1;
    for (auto d : header.shape) count *= d;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    in.seekg(static_cast<std::streamoff>(header.data_offset));
    std::vector<char> payload(count * item_size);
    in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
        throw Error(ErrorCode::DataError, path.string() + " is truncated");
    }
    return payload;
}

template <class Dst, class Src>
std::vector<Dst> convert(const std::vector<char>& payload) {
    std::vector<Dst> out(payload.size() / sizeof(Src));
    for (std::size_t i = 0; i < out.size(); ++i) {
        Src v;
        std::memcpy(&v, payload.data() + i * sizeof(Src), sizeof(Src));
        out[i] = static_cast<Dst>(v);
    }
    return out;
}

std::vector<double> read_real_values(const std::filesystem::path& path, const NpyHeader& h) {
    if (h.descr == "<f4") return convert<double, float>(read_payload(path, h, 4));
    if (h.descr == "<f8") return convert<double, double>(read_payload(path, h, 8));
    throw Error(ErrorCode::DataError, path.string() + ": expected a real float array, found '" + h.descr + "'");
}

void require_rank(const std::filesystem::path& path, const NpyHeader& h, std::size_t rank) {
    if (h.shape.size() != rank) {
        throw Error(ErrorCode::DataError, path.string() + ": expected rank " + std::to_string(rank) + " array");
    }
    for (auto d : h.shape)
        if (d == 0) throw Error(ErrorCode::DataError, path.string() + ": empty dimension");
}

}  // namespace

NpyHeader read_npy_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    char prefix[8];
    in.read(prefix, 8);
    if (in.gcount() != 8 || std::memcmp(prefix, kMagic, 6) != 0) {
        throw Error(ErrorCode::DataError, path.string() + " is not an NPY file");
    }
    const int major = static_cast<unsigned char>(prefix[6]);
    std::size_t header_len = 0;
    std::size_t fixed = 0;
    if (major == 1) {
        unsigned char b[2];
        in.read(reinterpret_cast<char*>(b), 2);
        header_len = b[0] | (b[1] << 8);
        fixed = 10;
    } else if (major == 2 || major == 3) {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        header_len = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::size_t>(b[3]) << 24);
        fixed = 12;
    } else {
        throw Error(ErrorCode::DataError, path.string() + ": unsupported NPY version");
    }
    std::string dict(header_len, '\0');
    in.read(dict.data(), static_cast<std::streamsize>(header_len));
    if (static_cast<std::size_t>(in.gcount()) != header_len) throw Error(ErrorCode::DataError, path.string() + " is truncated");

    static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
    static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
    static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
    std::smatch m;
    NpyHeader header;
    if (!std::regex_search(dict, m, descr_re)) throw Error(ErrorCode::DataError, path.string() + ": missing descr");
    header.descr = m[1];
    if (header.descr.size() > 1 && header.descr[0] == '|') header.descr[0] = '<';
    if (!std::regex_search(dict, m, order_re)) throw Error(ErrorCode::DataError, path.string() + ": missing fortran_order");
    if (m[1] == "True") throw Error(ErrorCode::DataError, path.string() + ": Fortran-ordered arrays are not supported");
    if (!std::regex_search(dict, m, shape_re)) throw Error(ErrorCode::DataError, path.string() + ": missing shape");
    std::string dims = m[1];
    std::stringstream ss(dims);
    std::string token;
    while (std::getline(ss, token, ',')) {
        const auto first = token.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        try {
            header.shape.push_back(std::stoull(token.substr(first)));
        } catch (const std::exception&) {
            throw Error(ErrorCode::DataError, path.string() + ": malformed shape");
        }
    }
    header.data_offset = fixed + header_len;
    return header;
}

void write_npy(const std::filesystem::path& path, const RealField& field) {
    std::vector<float> buf(field.begin(), field.end());
    write_raw(path, "<f4", {field.rows(), field.cols()}, buf.data(), buf.size() * sizeof(float));
}

void write_npy(const std::filesystem::path& path, const ComplexField& field) {
    std::vector<std::complex<float>> buf(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) buf[i] = std::complex<float>(field[i]);
    write_raw(path, "<c8", {field.rows(), field.cols()}, buf.data(), buf.size() * sizeof(std::complex<float>));
}

void write_npy(const std::filesystem::path& path, const std::vector<RealField>& planes) {
    if (planes.empty()) throw Error(ErrorCode::ShapeMismatch, "cannot write an empty stack");
    std::vector<float> buf;
    buf.reserve(planes.size() * planes.front().size());
    for (const auto& p : planes) {
        require_same_shape(p, planes.front(), "stack planes differ in shape");
        buf.insert(buf.end(), p.begin(), p.end());
    }
    write_raw(path, "<f4", {planes.size(), planes.front().rows(), planes.front().cols()}, buf.data(),
              buf.size() * sizeof(float));
}

RealField read_real_npy(const std::filesystem::path& path) {
    const auto h = read_npy_header(path);
    require_rank(path, h, 2);
    return RealField(h.shape[0], h.shape[1], read_real_values(path, h));
}

ComplexField read_complex_npy(const std::filesystem::path& path) {
    const auto h = read_npy_header(path);
    require_rank(path, h, 2);
    std::vector<Complex> values;
    if (h.descr == "<c8") {
        const auto raw = convert<float, float>(read_payload(path, h, 8));
        for (std::size_t i = 0; i + 1 < raw.size(); i += 2) values.emplace_back(raw[i], raw[i + 1]);
    } else if (h.descr == "<c16") {
        const auto raw = convert<double, double>(read_payload(path, h, 16));
        for (std::size_t i = 0; i + 1 < raw.size(); i += 2) values.emplace_back(raw[i], raw[i + 1]);
    } else {
        throw Error(ErrorCode::DataError, path.string() + ": expected a complex array, found '" + h.descr + "'");
    }
    return ComplexField(h.shape[0], h.shape[1], std::move(values));
}

std::vector<RealField> read_real_stack_npy(const std::filesystem::path& path) {
    const auto h = read_npy_header(path);
    require_rank(path, h, 3);
    const auto values = read_real_values(path, h);
    const std::size_t plane = h.shape[1] * h.shape[2];
    std::vector<RealField> out;
    for (std::size_t k = 0; k < h.shape[0]; ++k) {
        out.emplace_back(h.shape[1], h.shape[2],
                         std::vector<double>(values.begin() + k * plane, values.begin() + (k + 1) * plane));
    }
    return out;
}

}  // namespace ptycho::io
