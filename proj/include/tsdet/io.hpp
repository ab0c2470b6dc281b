#ifndef TSDET_IO_HPP
#define TSDET_IO_HPP

#include <string>
#include <vector>

#include "tsdet/boosting.hpp"
#include "tsdet/detect.hpp"
#include "tsdet/subcat.hpp"

namespace tsd {

// Line-oriented versioned text formats. Doubles print as %.17g and floats
// as %.9g so a write/read cycle reproduces every value bit for bit.

void write_model(const std::string& path, const BoostedModel& model);
BoostedModel read_model(const std::string& path);

void write_layout(const std::string& path, const SubcategoryLayout& layout);
SubcategoryLayout read_layout(const std::string& path);

struct DetectionRecord {
    std::string image_id;
    Detection det;
};

// Header line then `image_id class subcat left top right bottom raw_score
// calibrated_score`, six fractional digits on every real.
void write_detections(const std::string& path, const std::vector<DetectionRecord>& records);
std::vector<DetectionRecord> read_detections(const std::string& path);

}  // namespace tsd

#endif
