// Copyright 2026 The ged Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* Versioned C interface of an external pixel-correspondence kernel. All
 * arrays are row-major H*W; binary maps hold 0 or 1. */

#ifndef GED_MATCHKERNEL_ABI_H_
#define GED_MATCHKERNEL_ABI_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define GED_MK_ABI_VERSION 1u

enum {
  GED_MK_OK = 0,
  GED_MK_ERR_LENGTH = 1,    /* array length differs from H*W */
  GED_MK_ERR_ARGUMENT = 2,  /* bad dimension, tolerance or threshold list */
  GED_MK_ERR_INTERNAL = 3,
};

typedef struct ged_mk_counts {
  int32_t status;
  int64_t tp;          /* predicted pixels matched to at least one GT map */
  int64_t fp;          /* pred_count - tp */
  int64_t fn_total;    /* unmatched GT pixels summed over GT maps */
  int64_t pred_count;  /* predicted pixels */
} ged_mk_counts;

typedef uint32_t (*ged_mk_abi_version_fn)(void);

/* One binary prediction against one GT map. Either mask pointer may be NULL. */
typedef ged_mk_counts (*ged_mk_v1_correspond_fn)(const uint8_t* pred, size_t pred_len,
                                                 const uint8_t* gt, size_t gt_len, int32_t h,
                                                 int32_t w, double max_dist,
                                                 uint8_t* pred_matched_out,
                                                 uint8_t* gt_matched_out);

/* Counts at every threshold (prob >= t) against all GT maps. `out` holds
 * n_thresholds entries. When apply_nms is 0 the map is used as given.
 * Returns a GED_MK_* status. */
typedef int32_t (*ged_mk_v1_sweep_fn)(const double* prob, size_t prob_len,
                                      const uint8_t* const* gts, size_t n_gts, int32_t h,
                                      int32_t w, const double* thresholds, size_t n_thresholds,
                                      double max_dist, int32_t apply_nms, ged_mk_counts* out);

uint32_t ged_mk_abi_version(void);
ged_mk_counts ged_mk_v1_correspond(const uint8_t* pred, size_t pred_len, const uint8_t* gt,
                                   size_t gt_len, int32_t h, int32_t w, double max_dist,
                                   uint8_t* pred_matched_out, uint8_t* gt_matched_out);
int32_t ged_mk_v1_sweep(const double* prob, size_t prob_len, const uint8_t* const* gts,
                        size_t n_gts, int32_t h, int32_t w, const double* thresholds,
                        size_t n_thresholds, double max_dist, int32_t apply_nms,
                        ged_mk_counts* out);

#ifdef __cplusplus
}
#endif

#endif  /* GED_MATCHKERNEL_ABI_H_ */
