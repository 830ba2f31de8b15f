#pragma once

#include "pica/types.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace pica::wav {

struct WavData {
    std::vector<double> samples;  // scaled to [-1, 1]
    uint32_t sample_rate = 0;
};

namespace detail {

inline uint16_t read_u16(const unsigned char* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

inline uint32_t read_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline void write_u16(std::ostream& os, uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    os.write(b, 2);
}

inline void write_u32(std::ostream& os, uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

}  // namespace detail

// Reads a mono RIFF/WAVE file, PCM 16-bit or IEEE float 32-bit.
inline WavData read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open WAV file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw FormatError("not a RIFF/WAVE file: " + path);
    }

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    bool have_fmt = false;
    WavData out;
    bool have_data = false;

    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const uint32_t chunk_size = detail::read_u32(bytes.data() + pos + 4);
        const size_t body = pos + 8;
        if (body + chunk_size > bytes.size())
            throw FormatError("truncated chunk in WAV file: " + path);

        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_size < 16) throw FormatError("short fmt chunk: " + path);
            format = detail::read_u16(bytes.data() + body);
            channels = detail::read_u16(bytes.data() + body + 2);
            rate = detail::read_u32(bytes.data() + body + 4);
            bits = detail::read_u16(bytes.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            if (!have_fmt) throw FormatError("data chunk before fmt chunk: " + path);
            if (channels != 1) throw FormatError("only mono WAV supported: " + path);
            if (format == 1 && bits == 16) {
                const size_t count = chunk_size / 2;
                out.samples.resize(count);
                for (size_t i = 0; i < count; ++i) {
                    const int16_t s = static_cast<int16_t>(
                        detail::read_u16(bytes.data() + body + 2 * i));
                    out.samples[i] = static_cast<double>(s) / 32768.0;
                }
            } else if (format == 3 && bits == 32) {
                const size_t count = chunk_size / 4;
                out.samples.resize(count);
                for (size_t i = 0; i < count; ++i) {
                    uint32_t u = detail::read_u32(bytes.data() + body + 4 * i);
                    float f;
                    std::memcpy(&f, &u, 4);
                    out.samples[i] = static_cast<double>(f);
                }
            } else {
                throw FormatError("unsupported WAV encoding (want PCM16 or float32): " + path);
            }
            out.sample_rate = rate;
            have_data = true;
        }
        pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
    }

    if (!have_data) throw FormatError("no data chunk in WAV file: " + path);
    return out;
}

// Writes a mono 16-bit PCM WAV file; samples are clipped to [-1, 1].
inline void write_pcm16(const std::string& path, const std::vector<double>& samples,
                        uint32_t sample_rate) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open WAV file for writing: " + path);
    const uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
    os.write("RIFF", 4);
    detail::write_u32(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    detail::write_u32(os, 16);
    detail::write_u16(os, 1);  // PCM
    detail::write_u16(os, 1);  // mono
    detail::write_u32(os, sample_rate);
    detail::write_u32(os, sample_rate * 2);
    detail::write_u16(os, 2);
    detail::write_u16(os, 16);
    os.write("data", 4);
    detail::write_u32(os, data_bytes);
    for (double v : samples) {
        double c = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
        // same 32768 full scale as the reader, so a round trip stays within
        // half an LSB (except at the clamped positive rail)
        long q = std::lround(c * 32768.0);
        if (q > 32767) q = 32767;
        auto s = static_cast<int16_t>(q);
        detail::write_u16(os, static_cast<uint16_t>(s));
    }
    if (!os) throw FormatError("write failed: " + path);
}

}  // namespace pica::wav
