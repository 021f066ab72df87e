/* Copyright 2026 The CorEx-VAE Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#include "binary_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace corex::io {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    const std::size_t chunk = 1u << 30;
    for (std::size_t off = 0; off < bytes.size(); off += chunk) {
        const std::size_t n = std::min(chunk, bytes.size() - off);
        crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    }
    return static_cast<std::uint32_t>(crc);
}

void ByteWriter::write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::span<const std::uint8_t> verify_sealed(std::span<const std::uint8_t> bytes, std::string_view magic,
                                            const std::string& what) {
    if (bytes.size() < magic.size() ||
        std::string_view(reinterpret_cast<const char*>(bytes.data()), magic.size()) != magic) {
        throw FormatError(what + ": bad magic, expected '" + std::string(magic) + "'");
    }
    if (bytes.size() < magic.size() + 4) throw ChecksumError(what + ": file too short for checksum");
    const auto body = bytes.first(bytes.size() - 4);
    ByteReader tail(bytes.last(4), what);
    const std::uint32_t stored = tail.u32();
    const std::uint32_t actual = crc32(body);
    if (stored != actual) throw ChecksumError(what + ": CRC-32 mismatch (file corrupt or truncated)");
    return body;
}

}  // namespace corex::io
