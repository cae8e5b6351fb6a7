#pragma once

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <vector>

#include "vild/box.hpp"
#include "vild/training.hpp"

namespace vild {

// A class-agnostic proposal from the localization stage.
struct Proposal {
  Box box;
  double objectness = 1.0;
  std::vector<double> feature;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

struct ProposalImage {
  std::int64_t image_id = 0;
  std::vector<Proposal> proposals;

  friend bool operator==(const ProposalImage&, const ProposalImage&) = default;
};

// Line-delimited JSON codecs. Every reader reports the 1-based line number of
// the first malformed record through FormatError.
void write_detections(std::ostream& out, const std::vector<Detection>& dets);
std::vector<Detection> read_detections(std::istream& in);

void write_ground_truth(std::ostream& out, const std::vector<GroundTruth>& gts);
std::vector<GroundTruth> read_ground_truth(std::istream& in);

void write_training_samples(std::ostream& out, const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> read_training_samples(std::istream& in);

void write_proposals(std::ostream& out, const std::vector<ProposalImage>& images);
std::vector<ProposalImage> read_proposals(std::istream& in);

// File helpers; a missing input file raises ConfigError naming the path.
std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

template <class T, class Reader>
T load_file(const std::filesystem::path& path, Reader reader) {
  auto in = open_input(path);
  return reader(in);
}

}  // namespace vild
