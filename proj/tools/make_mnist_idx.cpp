// Packs raw uint8 image/label dumps into the standard IDX container pair
// (magic 0x803 for images, 0x801 for labels, big-endian dimensions). Rows
// are shuffled deterministically so the files carry no class ordering.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mononet/rng.hpp"

namespace {

void put_u32_be(std::ofstream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::vector<unsigned char> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open " << path << "\n";
        std::exit(1);
    }
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 5) {
        std::cerr << "usage: make_mnist_idx <raw_images> <raw_labels> <out_images_idx> "
                     "<out_labels_idx>\n";
        return 1;
    }
    const std::vector<unsigned char> images = read_all(argv[1]);
    const std::vector<unsigned char> labels = read_all(argv[2]);
    const std::size_t kPixels = 28 * 28;
    if (images.size() % kPixels != 0 || images.size() / kPixels != labels.size()) {
        std::cerr << "image bytes (" << images.size() << ") and labels (" << labels.size()
                  << ") disagree\n";
        return 1;
    }
    const std::size_t n = labels.size();

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    mononet::Rng rng(0);
    rng.shuffle(order);

    std::ofstream img_out(argv[3], std::ios::binary);
    std::ofstream lab_out(argv[4], std::ios::binary);
    if (!img_out || !lab_out) {
        std::cerr << "cannot open output files\n";
        return 1;
    }
    put_u32_be(img_out, 0x00000803u);
    put_u32_be(img_out, static_cast<std::uint32_t>(n));
    put_u32_be(img_out, 28);
    put_u32_be(img_out, 28);
    put_u32_be(lab_out, 0x00000801u);
    put_u32_be(lab_out, static_cast<std::uint32_t>(n));
    for (std::size_t i : order) {
        img_out.write(reinterpret_cast<const char*>(&images[i * kPixels]),
                      static_cast<std::streamsize>(kPixels));
        lab_out.put(static_cast<char>(labels[i]));
    }
    if (!img_out || !lab_out) {
        std::cerr << "write failed\n";
        return 1;
    }
    std::cout << "wrote " << n << " samples to " << argv[3] << " / " << argv[4] << "\n";
    return 0;
}
