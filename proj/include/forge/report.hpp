/* Copyright 2026 The Forge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Report bundles: JSON, CSV tables and optional SVG plots.

#ifndef FORGE_REPORT_HPP_
#define FORGE_REPORT_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "forge/diagnostics.hpp"
#include "forge/experiment.hpp"

namespace forge {

struct ReportBundle {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;  // e.g. an incomplete record
};

// Writes into `dir`:
//   report.json       the record, parseable by RunRecord::from_json
//   timeline.csv      t, extra_size, acc, asr, ap, extra_clean_fraction
//   pr_curves.csv     t, threshold, precision, recall
//   stages.csv        stage, seconds, cached
// and with `plots` also timeline.svg (ACC/ASR per iteration) and pr.svg.
ReportBundle export_report(const RunRecord& record, const std::filesystem::path& dir, bool plots = false);

// One row per attack; columns before_acc, before_asr, then <defense>_acc and
// <defense>_asr for each defense of the grid. Values are percentages.
void write_grid_table(const GridResult& grid, const std::filesystem::path& path);

// Columns: target_row, predicted, count, frequency. Empty rows are skipped.
void write_histogram_csv(const LabelHistogram& hist, const std::filesystem::path& path);

}  // namespace forge

#endif  // FORGE_REPORT_HPP_
