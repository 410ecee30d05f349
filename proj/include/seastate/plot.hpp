#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "seastate/evaluator.hpp"
#include "seastate/image.hpp"

namespace seastate {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 800;
  int height = 500;
  bool log_x = false;
  bool markers = true;
};

/// Line chart written as PNG. Output depends only on the inputs.
void plot_lines(const std::filesystem::path& path, const std::vector<Series>& series,
                const ChartOptions& options);

/// One bar per label.
void plot_bars(const std::filesystem::path& path, const std::vector<int>& labels,
               const std::vector<double>& values, const ChartOptions& options);

/// Count heatmap with cell annotations; rows are true classes.
void plot_confusion(const std::filesystem::path& path, const ConfusionMatrix& cm,
                    const std::string& title);

/// Grid of equally sized images with optional captions.
void write_contact_sheet(const std::filesystem::path& path, const std::vector<Image>& images,
                         int columns, const std::vector<std::string>& captions = {});

}  // namespace seastate
