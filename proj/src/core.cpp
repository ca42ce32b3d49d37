#include "splloc/types.hpp"

#include <algorithm>

namespace splloc {

double tiou(const Segment& a, const Segment& b) {
    const int inter = std::min(a.end, b.end) - std::max(a.start, b.start);
    if (inter <= 0) return 0.0;
    const int uni = std::max(a.end, b.end) - std::min(a.start, b.start);
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<const SubActionPrototype*> MemoryBank::flattened(int c) const {
    std::vector<const SubActionPrototype*> out;
    for (const PrototypeSet& set : categories[c]) {
        for (const SubActionPrototype& p : set.prototypes) out.push_back(&p);
    }
    return out;
}

std::vector<int> video_categories(const Video& video) {
    std::vector<int> cats;
    cats.reserve(video.points.size());
    for (const PointAnnotation& p : video.points) cats.push_back(p.category);
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    return cats;
}

}  // namespace splloc
