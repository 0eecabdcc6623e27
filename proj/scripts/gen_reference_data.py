#!/usr/bin/env python3
"""Regenerates the reference catalog, fixtures, corpus, rubric and recommendation
table under data/. Output is deterministic; rerun after editing the tables below."""

import hashlib
import json
import random
import shutil
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"

IMAGE_MODALITIES = ["CFP", "OCT", "FFA", "ICGA", "SLO", "UWF-SLO", "FAF", "MRI", "slit-lamp"]
FUNDUS = ["CFP", "SLO", "UWF-SLO", "FAF", "FFA", "ICGA"]
THRESHOLD = 0.3

DR = "diabetic retinopathy"
AMD = "age-related macular degeneration"
GLAUCOMA = "glaucoma"
RVO = "retinal vein occlusion"
MYOPIA = "pathologic myopia"
CSC = "central serous chorioretinopathy"
MH = "macular hole"
ERM = "epiretinal membrane"
DME = "diabetic macular edema"
VMT = "vitreomacular traction"
RD = "retinal detachment"
HR = "hypertensive retinopathy"
VASCULITIS = "retinal vasculitis"
PCV = "polypoidal choroidal vasculopathy"
GA = "geographic atrophy"

# ---------------------------------------------------------------- schemas

IMAGE_INPUT = {
    "type": "object",
    "required": ["image_id"],
    "properties": {
        "image_id": {"type": "string", "min_length": 1},
        "params": {"type": "object"},
        "context": {"type": "object"},
    },
}
TEXT_INPUT = {
    "type": "object",
    "required": ["text"],
    "properties": {
        "text": {"type": "string", "min_length": 1},
        "params": {"type": "object", "properties": {"k": {"type": "integer", "minimum": 1}}},
        "context": {"type": "object"},
    },
}
PROB = {"type": "number", "minimum": 0, "maximum": 1}
CLASSIFICATION_OUT = {
    "type": "object",
    "required": ["predictions", "threshold_used"],
    "properties": {
        "predictions": {
            "type": "array",
            "min_items": 1,
            "items": {
                "type": "object",
                "required": ["label", "probability"],
                "properties": {"label": {"type": "string", "min_length": 1}, "probability": PROB},
            },
        },
        "threshold_used": PROB,
    },
}
LESIONS_OUT = {
    "type": "object",
    "required": ["lesions"],
    "properties": {
        "lesions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["lesion_type", "count", "areas"],
                "properties": {
                    "lesion_type": {"type": "string", "min_length": 1},
                    "count": {"type": "integer", "minimum": 0},
                    "areas": {"type": "array", "items": {"type": "number", "minimum": 0}},
                },
            },
        },
        "mask_ref": {"type": "string"},
    },
}
DETECTIONS_OUT = {
    "type": "object",
    "required": ["detections"],
    "properties": {
        "detections": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["label", "confidence"],
                "properties": {
                    "label": {"type": "string", "min_length": 1},
                    "confidence": PROB,
                    "box": {"type": "array", "items": {"type": "number"}, "min_items": 4, "max_items": 4},
                },
            },
        }
    },
}
SCALAR_OUT = {
    "type": "object",
    "required": ["quantity", "value"],
    "properties": {
        "quantity": {"type": "string", "min_length": 1},
        "value": {"type": "number"},
        "scale_max": {"type": "number", "minimum": 1},
        "unit": {"type": "string"},
        "label": {"type": "string"},
    },
}
VESSEL_OUT = {
    "type": "object",
    "required": ["crae", "crve", "vessel_area_density", "fractal_dimension_artery"],
    "properties": {
        "crae": {"type": "number", "minimum": 0},
        "crve": {"type": "number", "minimum": 0},
        "avr": {"type": "number", "minimum": 0},
        "vessel_area_density": {"type": "number", "minimum": 0, "maximum": 100},
        "fractal_dimension_artery": {"type": "number", "minimum": 0},
        "tortuosity": {"type": "number", "minimum": 0},
    },
}
ARTIFACT_OUT = {
    "type": "object",
    "required": ["artifact_kind", "artifact_ref", "derived_from"],
    "properties": {
        "artifact_kind": {"type": "string", "enum": ["image-2d", "video", "model-3d", "text"]},
        "artifact_ref": {"type": "string", "min_length": 1},
        "artifact_id": {"type": "string"},
        "derived_from": {"type": "array", "items": {"type": "string"}},
    },
}
PASSAGES_OUT = {
    "type": "object",
    "required": ["hits", "score_floor"],
    "properties": {
        "hits": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["passage_id", "source_id", "score", "rank"],
                "properties": {
                    "passage_id": {"type": "string", "min_length": 1},
                    "source_id": {"type": "string", "min_length": 1},
                    "score": {"type": "number", "minimum": 0},
                    "rank": {"type": "integer", "minimum": 1},
                    "text": {"type": "string"},
                },
            },
        },
        "score_floor": {"type": "number", "minimum": 0},
    },
}

OUTPUT_SCHEMA = {
    "classification": CLASSIFICATION_OUT,
    "segmentation": LESIONS_OUT,
    "detection": DETECTIONS_OUT,
    "regression": SCALAR_OUT,
    "generation": ARTIFACT_OUT,
    "retrieval": PASSAGES_OUT,
}

# ---------------------------------------------------------------- catalog

TOOLS = []


def tool(tool_id, name, role, task, function, tier, modalities=None, conditions=(), lesions=(),
         usage=(), note="", threshold=None, **extra):
    d = {
        "tool_id": tool_id,
        "display_name": name,
        "role": role,
        "task": task,
        "function": function,
        "input": "text" if modalities is None else "image",
        "modalities": modalities or [],
        "conditions": list(conditions),
        "lesion_types": list(lesions),
        "input_schema": TEXT_INPUT if modalities is None else IMAGE_INPUT,
        "output_schema": VESSEL_OUT if function == "vessel_analysis" else OUTPUT_SCHEMA[task],
        "usage_conditions": list(usage),
        "tier": tier,
        "backend": {"kind": "fixture", "locator": f"fixtures/{tool_id}.json", "timeout_ms": 5000},
    }
    if note:
        d["usage_note"] = note
    if threshold is not None:
        d["threshold"] = threshold
    d.update(extra)
    TOOLS.append(d)
    return d


GP, RS, ME, CS = "general_practitioner", "retina_specialist", "medical_educator", "cross_specialty_analyzer"
MODALITY_KNOWN = {"fact": "modality", "op": "known"}

# Tier 1: general tools.
tool("modality_classifier", "Modality classifier", GP, "classification", "modality", 1, ["*"])
tool("quality_assessor", "Image quality assessor", GP, "classification", "quality", 1, IMAGE_MODALITIES,
     usage=[MODALITY_KNOWN])
tool("laterality_classifier", "Laterality classifier", GP, "classification", "laterality", 1, FUNDUS,
     usage=[{"fact": "modality", "op": "in", "values": FUNDUS}],
     note="fundus-type images only; OCT laterality comes from metadata")
tool("general_screener", "General multi-condition screener", GP, "classification", "screening", 1,
     ["CFP", "OCT", "FFA", "ICGA", "SLO", "UWF-SLO", "FAF"], usage=[MODALITY_KNOWN])
tool("referral_triage", "Referral triage", GP, "classification", "triage", 1,
     ["CFP", "OCT", "FFA", "ICGA", "SLO", "UWF-SLO", "FAF"], usage=[MODALITY_KNOWN],
     note="fifth general tool; its identity as referral triage is an assumption of this catalog")


def specialist(tool_id, name, modalities, conditions, parents):
    return tool(tool_id, name, RS, "classification", "specialist", 2, modalities, conditions,
                usage=[MODALITY_KNOWN], label_parents=parents)


# Tier 2: disease-specific classifiers.
specialist("dr_grader", "Diabetic retinopathy grader", ["CFP", "UWF-SLO", "SLO"], [DR], {
    "no diabetic retinopathy": "normal",
    "mild non-proliferative diabetic retinopathy": DR,
    "moderate non-proliferative diabetic retinopathy": DR,
    "severe non-proliferative diabetic retinopathy": DR,
    "proliferative diabetic retinopathy": DR,
})
specialist("amd_stager", "AMD stager", ["CFP", "OCT"], [AMD], {
    "no amd": "normal",
    "early amd": AMD,
    "intermediate amd": AMD,
    "neovascular amd": AMD,
    "geographic atrophy": AMD,
})
specialist("glaucoma_risk", "Glaucoma risk classifier", ["CFP"], [GLAUCOMA], {
    "low glaucoma risk": "normal",
    "referable glaucoma": GLAUCOMA,
})
specialist("myopia_classifier", "Pathologic myopia classifier", ["CFP"], [MYOPIA], {
    "no myopic maculopathy": "normal",
    "tessellated fundus": MYOPIA,
    "diffuse chorioretinal atrophy": MYOPIA,
    "patchy chorioretinal atrophy": MYOPIA,
})
specialist("rvo_classifier", "Retinal vein occlusion subtype classifier", ["CFP", "SLO", "UWF-SLO", "FFA"], [RVO], {
    "no retinal vein occlusion": "normal",
    "central retinal vein occlusion": RVO,
    "branch retinal vein occlusion": RVO,
    "hemiretinal vein occlusion": RVO,
})
specialist("csc_classifier", "CSC classifier", ["OCT", "FFA"], [CSC], {
    "no csc": "normal",
    "acute central serous chorioretinopathy": CSC,
    "chronic central serous chorioretinopathy": CSC,
})
specialist("oct_macular_classifier", "OCT macular disease classifier", ["OCT"], [MH, ERM, DME, VMT], {
    "no macular abnormality": "normal",
    "full-thickness macular hole": MH,
    "lamellar macular hole": MH,
    "center-involved diabetic macular edema": DME,
})
specialist("ffa_lesion_classifier", "FFA disease classifier", ["FFA"], [DR, RVO, VASCULITIS], {
    "no angiographic abnormality": "normal",
    "proliferative diabetic retinopathy": DR,
    "non-proliferative diabetic retinopathy": DR,
    "ischemic retinal vein occlusion": RVO,
    "occlusive retinal vasculitis": VASCULITIS,
})
specialist("retinal_detachment_classifier", "Retinal detachment classifier", ["CFP", "UWF-SLO", "SLO", "OCT"], [RD], {
    "no retinal detachment": "normal",
    "rhegmatogenous retinal detachment": RD,
    "tractional retinal detachment": RD,
})


def segmenter(tool_id, name, modalities, lesions, conditions, usage=(), note=""):
    return tool(tool_id, name, RS, "segmentation", "segmentation", 3, modalities, conditions, lesions,
                usage=[MODALITY_KNOWN, *usage], note=note)


# Tier 3: segmentation.
segmenter("cfp_ma_seg", "CFP microaneurysm segmentation", ["CFP"], ["microaneurysm"], [DR])
segmenter("cfp_hemorrhage_seg", "CFP hemorrhage segmentation", ["CFP"], ["hemorrhage"], [DR, RVO])
segmenter("cfp_exudate_seg", "CFP hard exudate segmentation", ["CFP"], ["hard exudate"], [DR])
segmenter("cfp_cws_seg", "CFP cotton wool spot segmentation", ["CFP"], ["cotton wool spot"], [DR, RVO, HR])
segmenter("cfp_drusen_seg", "CFP drusen segmentation", ["CFP"], ["drusen"], [AMD])
segmenter("cfp_vessel_seg", "CFP vessel segmentation", ["CFP"], ["vessel"], [HR])
segmenter("cfp_optic_disc_seg", "Optic disc and cup segmentation", ["CFP"], ["optic disc", "optic cup"], [GLAUCOMA])
segmenter("cfp_artifact_seg", "CFP artifact segmentation", ["CFP"], ["artifact"], [],
          usage=[{"fact": "quality", "op": "in", "values": ["gradable_with_artifacts", "ungradable"]}],
          note="only after quality assessment reports artifacts")
segmenter("cfp_atrophy_seg", "CFP chorioretinal atrophy segmentation", ["CFP"], ["atrophy"], [MYOPIA, AMD, GA])
segmenter("oct_layer_seg", "OCT retinal layer segmentation", ["OCT"], ["retinal layer"], [AMD, DME, ERM])
segmenter("oct_fluid_seg", "OCT retinal fluid segmentation", ["OCT"], ["retinal fluid"], [AMD, DME, CSC, MH, RVO])
segmenter("oct_mh_seg", "OCT macular hole segmentation", ["OCT"], ["macular hole"], [MH])
segmenter("oct_tear_seg", "OCT retinal tear segmentation", ["OCT"], ["retinal tear"], [RD])
segmenter("ffa_npa_seg", "FFA non-perfusion segmentation", ["FFA"], ["non-perfusion"], [RVO, VASCULITIS])
segmenter("ffa_leakage_seg", "FFA leakage segmentation", ["FFA"], ["leakage"], [DR, CSC, VASCULITIS])
segmenter("ffa_nv_seg", "FFA neovascularization segmentation", ["FFA"], ["neovascularization"], [DR])
segmenter("ffa_ma_seg", "FFA microaneurysm segmentation", ["FFA"], ["microaneurysm"], [DR])
segmenter("ffa_laser_seg", "FFA laser spot segmentation", ["FFA"], ["laser spot"], [DR])
segmenter("ffa_blocked_seg", "FFA blocked fluorescence segmentation", ["FFA"], ["blocked fluorescence"], [DR, RVO])
segmenter("icga_polyp_seg", "ICGA polyp segmentation", ["ICGA"], ["polyp"], [PCV])
segmenter("uwf_hemorrhage_seg", "UWF hemorrhage segmentation", ["SLO", "UWF-SLO"], ["hemorrhage"], [RVO, DR])


def generator(tool_id, name, modalities, kind, target=None, function="generation", tier=4):
    extra = {"artifact_kind": kind}
    if target:
        extra["generation_target"] = target
    return tool(tool_id, name, ME, "generation", function, tier, modalities, **extra)


# Tier 4: generation and report tools.
generator("cfp_to_ffa", "CFP to FFA translation", ["CFP"], "image-2d", "FFA")
generator("cfp_to_oct", "CFP to OCT translation", ["CFP"], "image-2d", "OCT")
generator("cfp_to_icga", "CFP to ICGA translation", ["CFP"], "image-2d", "ICGA")
generator("uwf_to_cfp", "UWF to CFP translation", ["UWF-SLO", "SLO"], "image-2d", "CFP")
generator("eye_globe_3d", "3D eye globe reconstruction", ["CFP"], "model-3d")
generator("text_to_image", "Text-to-fundus image synthesis", None, "image-2d")
generator("cfp_to_ffa_video", "Dynamic FFA video synthesis", ["CFP"], "video")
generator("cfp_report", "CFP report writer", ["CFP"], "text", function="report")
generator("oct_report", "OCT report writer", ["OCT"], "text", function="report")
generator("ffa_report", "FFA report writer", ["FFA"], "text", function="report")
generator("uwf_report", "UWF report writer", ["UWF-SLO", "SLO"], "text", function="report")

# Tier 5: quantification, systemic risk, retrieval.
tool("vessel_quantifier", "Retinal vessel quantifier", CS, "regression", "vessel_analysis", 5, ["CFP"],
     ["cardiovascular risk", HR], usage=[MODALITY_KNOWN])
tool("av_nicking_detector", "Arteriovenous nicking detector", CS, "detection", "detection", 5, ["CFP"],
     ["cardiovascular risk", HR], usage=[MODALITY_KNOWN])
tool("cvd_risk_regressor", "Cardiovascular risk regressor", CS, "regression", "risk_regression", 5, ["CFP"],
     ["cardiovascular risk"], usage=[MODALITY_KNOWN])
tool("retinal_age_regressor", "Retinal age regressor", CS, "regression", "demographic", 5, ["CFP"],
     ["retinal age"], usage=[MODALITY_KNOWN])
tool("sex_estimator", "Sex estimator", CS, "classification", "demographic", 5, ["CFP"], ["sex"],
     usage=[MODALITY_KNOWN])
tool("choroidal_vascularity", "Choroidal vascularity index", RS, "regression", "risk_regression", 5, ["OCT"],
     ["choroidal vascularity", MYOPIA], usage=[MODALITY_KNOWN])
tool("textbook_rag", "Textbook retrieval", ME, "retrieval", "retrieval", 5, None,
     backend_override=None)
TOOLS[-1]["backend"] = {"kind": "knowledge", "locator": "kb", "timeout_ms": 2000}
del TOOLS[-1]["backend_override"]

# ---------------------------------------------------------------- fixtures

LATENCY = {
    "modality": 40, "quality": 55, "laterality": 85, "screening": 240, "triage": 30, "specialist": 180,
    "segmentation": 300, "vessel_analysis": 350, "detection": 200, "risk_regression": 150,
    "demographic": 120, "generation": 900, "report": 600,
}
BY_ID = {t["tool_id"]: t for t in TOOLS}


def jitter(*parts):
    return int(hashlib.sha256(":".join(parts).encode()).hexdigest(), 16) % 10


def latency(tool_id, image_id):
    return float(LATENCY[BY_ID[tool_id]["function"]] + jitter(tool_id, image_id))


def cls(*preds, threshold=THRESHOLD):
    return {"predictions": [{"label": l, "probability": p} for l, p in preds], "threshold_used": threshold}


def spread(n, lo, hi, seed):
    """n areas with exact min lo and max hi, others on a 0.5 grid in between."""
    if n == 0:
        return []
    if n == 1:
        return [lo]
    rng = random.Random(seed)
    inner = [round(rng.uniform(lo, hi) * 2) / 2 for _ in range(n - 2)]
    inner = [min(max(a, lo), hi) for a in inner]
    return [lo, *inner, hi]


def lesions(*sets):
    return {"lesions": [{"lesion_type": t, "count": len(a), "areas": a} for t, a in sets]}


def empty_lesions(tool_id):
    return lesions(*[(t, []) for t in BY_ID[tool_id]["lesion_types"]])


def artifact(kind, ref, derived, artifact_id=None):
    out = {"artifact_kind": kind, "artifact_ref": ref, "derived_from": derived}
    if artifact_id:
        out["artifact_id"] = artifact_id
    return out


TRIAGE = {"normal": ("routine review", 0.91)}


def triage_for(screen_top):
    label, p = TRIAGE.get(screen_top, ("non-urgent referral", 0.74))
    if screen_top in (RVO, RD, "proliferative diabetic retinopathy"):
        label, p = "urgent referral", 0.82
    return cls((label, p))


# ---------------------------------------------------------------- cases
#
# Each case lists per-image tool outputs. Tools not listed fall back to the
# tool's default output (negative specialist label, empty lesion sets).


def img(image_id, modality, *, hint=None, lat_hint=None, quality=("gradable", 0.95), laterality=None,
        screening, outputs=None):
    return {
        "image_id": image_id,
        "modality_preds": modality,
        "hint": hint,
        "lat_hint": lat_hint,
        "quality": quality,
        "laterality": laterality,
        "screening": screening,
        "outputs": outputs or {},
    }


CASES = []


def case(case_id, query, images, gt_diagnosis, gt_modality, expected, corpus=True, generated=None):
    CASES.append({
        "case_id": case_id, "query": query, "images": images, "gt": gt_diagnosis, "gt_modality": gt_modality,
        "expected": expected, "corpus": corpus, "generated": generated or {},
    })


CORE_FUNDUS = ["modality_classifier", "quality_assessor", "laterality_classifier", "general_screener"]
CORE_OCT = ["modality_classifier", "quality_assessor", "general_screener"]

# Fig. 3 routine and adversarial scenarios.
case("crvo_uwf", "What is the potential diagnosis? (provide me the modality, laterality and diagnosis)", [
    img("crvo_uwf_img1", [("SLO", 0.988), ("UWF-SLO", 0.972)], laterality=[("OS", 0.871)],
        screening=[(RVO, 0.936)],
        outputs={
            "rvo_classifier": cls(("central retinal vein occlusion", 0.878)),
            "uwf_hemorrhage_seg": lesions(("hemorrhage", spread(43, 2.5, 6120.0, "crvo_hem"))),
        }),
], "central retinal vein occlusion", "UWF-SLO", CORE_FUNDUS + ["rvo_classifier", "uwf_hemorrhage_seg"])

case("mh_oct", "Is there any abnormality? provide me the diagnosis and label the lesions", [
    img("mh_oct_img1", [("OCT", 0.997)], hint="OCT", lat_hint="OD", screening=[(MH, 0.912)],
        outputs={
            "oct_macular_classifier": cls(("full-thickness macular hole", 0.934)),
            "oct_mh_seg": lesions(("macular hole", [19829.0])),
            "oct_fluid_seg": lesions(("retinal fluid", spread(12, 1.0, 572.5, "mh_fluid"))),
        }),
], "full-thickness macular hole", "OCT", CORE_OCT + ["oct_macular_classifier", "oct_mh_seg", "oct_fluid_seg"])

case("drusen_cfp", "Count, label, and measure the diameter of all the drusen in the image.", [
    img("drusen_cfp_img1", [("CFP", 0.993)], laterality=[("OS", 0.944)], screening=[(AMD, 0.811)],
        outputs={
            "amd_stager": cls(("intermediate amd", 0.768), ("early amd", 0.312)),
            "cfp_drusen_seg": lesions(("drusen", spread(816, 0.1, 358.2, "drusen"))),
            "cfp_atrophy_seg": lesions(("atrophy", [])),
        }),
], "intermediate amd", "CFP", CORE_FUNDUS + ["amd_stager", "cfp_drusen_seg"])

case("laser_ffa", "Can you create a medical assessment report from this image and label the lesions?", [
    img("laser_ffa_img1", [("FFA", 0.985)], hint="FFA", laterality=[("OD", 0.902)], screening=[(DR, 0.874)],
        outputs={
            "ffa_lesion_classifier": cls(("proliferative diabetic retinopathy", 0.716)),
            "ffa_nv_seg": lesions(("neovascularization", [472.5])),
            "ffa_laser_seg": lesions(("laser spot", spread(105, 0.1, 577.5, "laser"))),
            "ffa_ma_seg": lesions(("microaneurysm", spread(56, 0.1, 57.5, "ffa_ma"))),
            "ffa_report": artifact("text", "artifacts/laser_ffa/report.txt", ["laser_ffa_img1"]),
        }),
], "proliferative diabetic retinopathy", "FFA",
    CORE_FUNDUS + ["ffa_lesion_classifier", "ffa_nv_seg", "ffa_laser_seg", "ffa_ma_seg", "ffa_leakage_seg",
                   "ffa_report"])

case("pdr_cfp", "Give me the diagnosis and explanation based on this image and generate the corresponding FFA "
     "image with labeled lesions.", [
    img("pdr_cfp_img1", [("CFP", 0.996)], laterality=[("OD", 0.953)], screening=[(DR, 0.902)],
        outputs={
            "dr_grader": cls(("proliferative diabetic retinopathy", 0.637),
                             ("severe non-proliferative diabetic retinopathy", 0.331)),
            "cfp_ma_seg": lesions(("microaneurysm", spread(17, 3.5, 124.5, "pdr_ma"))),
            "cfp_hemorrhage_seg": lesions(("hemorrhage", spread(27, 0.1, 10240.5, "pdr_hem"))),
            "cfp_exudate_seg": lesions(("hard exudate", spread(18, 0.1, 1297.5, "pdr_ex"))),
            "cfp_cws_seg": lesions(("cotton wool spot", spread(3, 446.0, 2162.0, "pdr_cws"))),
            "cfp_to_ffa": artifact("image-2d", "artifacts/pdr_cfp/ffa_late_phase.json", ["pdr_cfp_img1"],
                                   "pdr_cfp_img1_ffa"),
        }),
], "proliferative diabetic retinopathy", "CFP",
    CORE_FUNDUS + ["dr_grader", "cfp_ma_seg", "cfp_hemorrhage_seg", "cfp_exudate_seg", "cfp_cws_seg", "cfp_to_ffa",
                   "ffa_blocked_seg", "ffa_leakage_seg", "ffa_nv_seg", "ffa_ma_seg", "ffa_npa_seg"],
    generated={"pdr_cfp_img1_ffa": {
        "ffa_blocked_seg": lesions(("blocked fluorescence", spread(3, 0.0, 9039.0, "pdr_block"))),
        "ffa_leakage_seg": lesions(("leakage", spread(14, 0.1, 541.0, "pdr_leak"))),
        "ffa_nv_seg": lesions(("neovascularization", [8121.5])),
        "ffa_ma_seg": lesions(("microaneurysm", [25.0])),
    }})

case("myopia_cfp", "What is the diagnosis of this image and what is its eyeball shape look like (generate the 3D "
     "eye shape)?", [
    img("myopia_cfp_img1", [("CFP", 0.991)], laterality=[("OD", 0.889)], screening=[(MYOPIA, 0.701)],
        outputs={
            "myopia_classifier": cls(("diffuse chorioretinal atrophy", 0.742)),
            "cfp_atrophy_seg": lesions(("atrophy", spread(4, 812.0, 15320.5, "pm_atrophy"))),
            "eye_globe_3d": artifact("model-3d", "artifacts/myopia_cfp/globe.json", ["myopia_cfp_img1"]),
        }),
], "diffuse chorioretinal atrophy", "CFP", CORE_FUNDUS + ["myopia_classifier", "cfp_atrophy_seg", "eye_globe_3d"])

case("cvd_cfp", "Please quantify the retinal vessels and predict the risk of developing cardiovascular disease "
     "within the next 5 years.", [
    img("cvd_cfp_img1", [("CFP", 0.995)], laterality=[("OD", 0.917)], screening=[(HR, 0.612)],
        outputs={
            "vessel_quantifier": {"crae": 9.16, "crve": 17.53, "avr": 0.523, "vessel_area_density": 14.43,
                                  "fractal_dimension_artery": 1.746},
            "av_nicking_detector": {"detections": [
                {"label": "arteriovenous nicking", "confidence": 0.45, "box": [812, 604, 868, 655]},
                {"label": "arteriovenous nicking", "confidence": 0.33, "box": [1290, 948, 1337, 991]}]},
            ("cvd_risk_regressor", "horizon5"): {"quantity": "5-year cardiovascular risk level", "value": 4,
                                                 "scale_max": 9, "label": "Medium Risk"},
            "cfp_vessel_seg": lesions(("vessel", [])),
            "cfp_cws_seg": lesions(("cotton wool spot", [])),
        }),
], HR, "CFP", CORE_FUNDUS + ["vessel_quantifier", "av_nicking_detector", "cvd_risk_regressor", "cfp_vessel_seg"])

case("artifact_cfp", "What is the examination result?", [
    img("artifact_cfp_img1", [("CFP", 0.989)], laterality=[("OS", 0.932)],
        quality=("gradable_with_artifacts", 0.813), screening=[("normal", 0.642), (DR, 0.315)],
        outputs={
            "dr_grader": cls(("no diabetic retinopathy", 0.996)),
            "cfp_artifact_seg": lesions(("artifact", spread(68, 0.5, 212.0, "artifacts"))),
        }),
], "normal", "CFP", CORE_FUNDUS + ["dr_grader", "cfp_artifact_seg"])

case("misleading_cfp", "I have macular disease. What should I do?", [
    img("misleading_cfp_img1", [("CFP", 0.994)], laterality=[("OD", 0.906)], screening=[("normal", 0.931)],
        outputs={
            "amd_stager": cls(("no amd", 0.952)),
            "dr_grader": cls(("no diabetic retinopathy", 0.978)),
            "glaucoma_risk": cls(("low glaucoma risk", 0.915)),
        }),
], "normal", "CFP", CORE_FUNDUS + ["amd_stager", "dr_grader", "glaucoma_risk"])

# Conflict scenarios.
case("conflict_dr_cfp", "Screening and grading disagree on this fundus photo; please verify.", [
    img("conflict_dr_cfp_img1", [("CFP", 0.992)], laterality=[("OD", 0.884)], screening=[(DR, 0.52), ("normal", 0.41)],
        outputs={
            "dr_grader": cls(("no diabetic retinopathy", 0.81)),
            "cfp_to_ffa": artifact("image-2d", "artifacts/conflict_dr_cfp/ffa.json", ["conflict_dr_cfp_img1"],
                                   "conflict_dr_cfp_img1_ffa"),
        }),
], "normal", "CFP", CORE_FUNDUS + ["dr_grader", "cfp_to_ffa"],
    generated={"conflict_dr_cfp_img1_ffa": {"general_screener": cls(("normal", 0.74))}})

case("conflict_amd_cfp", "What is the diagnosis?", [
    img("conflict_amd_cfp_img1", [("CFP", 0.99)], laterality=[("OS", 0.871)], screening=[(AMD, 0.5), ("normal", 0.35)],
        outputs={
            "amd_stager": cls(("no amd", 0.42), ("early amd", 0.38)),
            "cfp_to_ffa": artifact("image-2d", "artifacts/conflict_amd_cfp/ffa.json", ["conflict_amd_cfp_img1"],
                                   "conflict_amd_cfp_img1_ffa"),
        }),
], "normal", "CFP", CORE_FUNDUS + ["amd_stager", "cfp_to_ffa", "cfp_drusen_seg"],
    generated={"conflict_amd_cfp_img1_ffa": {"general_screener": cls(("normal", 0.7))}})

case("glaucoma_conflict_cfp", "Please check this optic disc photo.", [
    img("glaucoma_conflict_cfp_img1", [("CFP", 0.988)], laterality=[("OD", 0.861)],
        screening=[(GLAUCOMA, 0.48), ("normal", 0.4)],
        outputs={
            "glaucoma_risk": cls(("low glaucoma risk", 0.46), ("referable glaucoma", 0.44)),
            "cfp_optic_disc_seg": lesions(("optic cup", [5120.5]), ("optic disc", [11890.0])),
            "cfp_to_ffa": artifact("image-2d", "artifacts/glaucoma_conflict_cfp/ffa.json",
                                   ["glaucoma_conflict_cfp_img1"], "glaucoma_conflict_cfp_img1_ffa"),
        }),
], GLAUCOMA, "CFP", CORE_FUNDUS + ["glaucoma_risk", "cfp_optic_disc_seg"],
    generated={"glaucoma_conflict_cfp_img1_ffa": {"general_screener": cls((GLAUCOMA, 0.51), ("normal", 0.42))}})

# Routine cases.
case("ungradable_cfp", "What is the diagnosis?", [
    img("ungradable_cfp_img1", [("CFP", 0.972)], laterality=[("OS", 0.702)], quality=("ungradable", 0.88),
        screening=[("normal", 0.55)]),
], "normal", "CFP", CORE_FUNDUS)

case("npdr_cfp", "Does this patient have diabetic eye disease?", [
    img("npdr_cfp_img1", [("CFP", 0.995)], laterality=[("OS", 0.948)], screening=[(DR, 0.833)],
        outputs={
            "dr_grader": cls(("moderate non-proliferative diabetic retinopathy", 0.702),
                             ("mild non-proliferative diabetic retinopathy", 0.304)),
            "cfp_ma_seg": lesions(("microaneurysm", spread(11, 2.0, 96.5, "npdr_ma"))),
            "cfp_hemorrhage_seg": lesions(("hemorrhage", spread(6, 4.5, 612.0, "npdr_hem"))),
            "cfp_exudate_seg": lesions(("hard exudate", spread(9, 0.5, 402.0, "npdr_ex"))),
        }),
], "moderate non-proliferative diabetic retinopathy", "CFP",
    CORE_FUNDUS + ["dr_grader", "cfp_ma_seg", "cfp_hemorrhage_seg", "cfp_exudate_seg"])

case("wet_amd_oct", "What does this OCT show?", [
    img("wet_amd_oct_img1", [("OCT", 0.998)], hint="OCT", lat_hint="OS", screening=[(AMD, 0.873)],
        outputs={
            "amd_stager": cls(("neovascular amd", 0.812)),
            "oct_fluid_seg": lesions(("retinal fluid", spread(7, 12.0, 3406.5, "wamd_fluid"))),
            "oct_layer_seg": lesions(("retinal layer", spread(9, 1510.0, 48210.0, "wamd_layers"))),
        }),
], "wet AMD", "OCT", CORE_OCT + ["amd_stager", "oct_fluid_seg", "oct_layer_seg", "cfp_drusen_seg"])

case("csc_oct", "What is the diagnosis?", [
    img("csc_oct_img1", [("OCT", 0.996)], hint="OCT", lat_hint="OD", screening=[(CSC, 0.79)],
        outputs={
            "csc_classifier": cls(("acute central serous chorioretinopathy", 0.771)),
            "oct_fluid_seg": lesions(("retinal fluid", spread(2, 140.0, 8233.5, "csc_fluid"))),
        }),
], "acute central serous chorioretinopathy", "OCT", CORE_OCT + ["csc_classifier", "oct_fluid_seg"])

case("erm_oct", "Is this macula normal?", [
    img("erm_oct_img1", [("OCT", 0.995)], hint="OCT", lat_hint="OS", screening=[(ERM, 0.724)],
        outputs={
            "oct_macular_classifier": cls((ERM, 0.881)),
            "oct_layer_seg": lesions(("retinal layer", spread(9, 1320.0, 51230.0, "erm_layers"))),
        }),
], ERM, "OCT", CORE_OCT + ["oct_macular_classifier", "oct_layer_seg"])

case("dme_oct", "Please assess this scan from a diabetic patient.", [
    img("dme_oct_img1", [("OCT", 0.997)], hint="OCT", lat_hint="OD", screening=[(DME, 0.805)],
        outputs={
            "oct_macular_classifier": cls(("center-involved diabetic macular edema", 0.792)),
            "oct_fluid_seg": lesions(("retinal fluid", spread(15, 3.0, 2410.0, "dme_fluid"))),
            "oct_layer_seg": lesions(("retinal layer", spread(9, 1402.0, 55102.0, "dme_layers"))),
        }),
], "center-involved diabetic macular edema", "OCT",
    CORE_OCT + ["oct_macular_classifier", "oct_fluid_seg", "oct_layer_seg"])

case("rd_uwf", "What is wrong with this eye?", [
    img("rd_uwf_img1", [("UWF-SLO", 0.981), ("SLO", 0.962)], laterality=[("OD", 0.892)], screening=[(RD, 0.806)],
        outputs={"retinal_detachment_classifier": cls(("rhegmatogenous retinal detachment", 0.862))}),
], "rhegmatogenous retinal detachment", "UWF-SLO", CORE_FUNDUS + ["retinal_detachment_classifier"])

case("brvo_cfp", "What is the diagnosis?", [
    img("brvo_cfp_img1", [("CFP", 0.993)], laterality=[("OS", 0.901)], screening=[(RVO, 0.702)],
        outputs={
            "rvo_classifier": cls(("branch retinal vein occlusion", 0.804)),
            "cfp_hemorrhage_seg": lesions(("hemorrhage", spread(21, 0.5, 2205.0, "brvo_hem"))),
            "cfp_cws_seg": lesions(("cotton wool spot", spread(2, 310.0, 702.5, "brvo_cws"))),
        }),
], "branch retinal vein occlusion", "CFP", CORE_FUNDUS + ["rvo_classifier", "cfp_hemorrhage_seg", "cfp_cws_seg"])

case("glaucoma_cfp", "Is there glaucomatous damage?", [
    img("glaucoma_cfp_img1", [("CFP", 0.994)], laterality=[("OS", 0.911)], screening=[(GLAUCOMA, 0.664)],
        outputs={
            "glaucoma_risk": cls(("referable glaucoma", 0.783)),
            "cfp_optic_disc_seg": lesions(("optic cup", [7410.0]), ("optic disc", [10980.5])),
        }),
], "referable glaucoma", "CFP", CORE_FUNDUS + ["glaucoma_risk", "cfp_optic_disc_seg"])

case("myopic_maculopathy_cfp", "What is the diagnosis?", [
    img("myopic_maculopathy_cfp_img1", [("CFP", 0.99)], laterality=[("OS", 0.874)], screening=[(MYOPIA, 0.758)],
        outputs={
            "myopia_classifier": cls(("patchy chorioretinal atrophy", 0.691), ("diffuse chorioretinal atrophy", 0.302)),
            "cfp_atrophy_seg": lesions(("atrophy", spread(6, 140.5, 9921.0, "mm_atrophy"))),
        }),
], "patchy chorioretinal atrophy", "CFP", CORE_FUNDUS + ["myopia_classifier", "cfp_atrophy_seg"])

case("normal_cfp", "Is this fundus normal?", [
    img("normal_cfp_img1", [("CFP", 0.997)], laterality=[("OD", 0.962)], screening=[("normal", 0.951)]),
], "normal", "CFP", CORE_FUNDUS)

case("vasculitis_ffa", "What do you see on this angiogram?", [
    img("vasculitis_ffa_img1", [("FFA", 0.987)], hint="FFA", laterality=[("OD", 0.822)],
        screening=[(VASCULITIS, 0.604)],
        outputs={
            "ffa_lesion_classifier": cls(("occlusive retinal vasculitis", 0.703)),
            "ffa_leakage_seg": lesions(("leakage", spread(22, 1.5, 1840.0, "vasc_leak"))),
            "ffa_npa_seg": lesions(("non-perfusion", spread(5, 902.0, 22310.0, "vasc_npa"))),
        }),
], "occlusive retinal vasculitis", "FFA",
    CORE_FUNDUS + ["ffa_lesion_classifier", "ffa_leakage_seg", "ffa_npa_seg"])

case("pcv_icga", "What is the diagnosis?", [
    img("pcv_icga_img1", [("ICGA", 0.979)], hint="ICGA", laterality=[("OS", 0.808)], screening=[(PCV, 0.742)],
        outputs={"icga_polyp_seg": lesions(("polyp", spread(3, 210.0, 1620.5, "pcv_polyp")))}),
], PCV, "ICGA", CORE_FUNDUS + ["icga_polyp_seg", "oct_fluid_seg"])

case("dr_misgrade_cfp", "What stage is this diabetic retinopathy?", [
    img("dr_misgrade_cfp_img1", [("CFP", 0.994)], laterality=[("OD", 0.939)], screening=[(DR, 0.801)],
        outputs={
            "dr_grader": cls(("severe non-proliferative diabetic retinopathy", 0.553),
                             ("proliferative diabetic retinopathy", 0.412)),
            "cfp_ma_seg": lesions(("microaneurysm", spread(31, 1.5, 140.0, "mis_ma"))),
            "cfp_hemorrhage_seg": lesions(("hemorrhage", spread(44, 0.5, 3820.0, "mis_hem"))),
            "cfp_exudate_seg": lesions(("hard exudate", spread(12, 0.5, 802.5, "mis_ex"))),
            "cfp_cws_seg": lesions(("cotton wool spot", spread(5, 120.0, 1402.0, "mis_cws"))),
        }),
], "proliferative diabetic retinopathy", "CFP",
    CORE_FUNDUS + ["dr_grader", "cfp_ma_seg", "cfp_hemorrhage_seg", "cfp_exudate_seg", "cfp_cws_seg"])

case("ga_faf", "What is the diagnosis?", [
    img("ga_faf_img1", [("FAF", 0.968)], hint="FAF", laterality=[("OD", 0.873)], screening=[(GA, 0.633)]),
], GA, "FAF", CORE_FUNDUS)

case("lamellar_mh_oct", "What is the diagnosis?", [
    img("lamellar_mh_oct_img1", [("OCT", 0.996)], hint="OCT", lat_hint="OS", screening=[(MH, 0.701)],
        outputs={
            "oct_macular_classifier": cls(("lamellar macular hole", 0.664)),
            "oct_mh_seg": lesions(("macular hole", [4102.5])),
            "oct_fluid_seg": lesions(("retinal fluid", [])),
        }),
], "lamellar macular hole", "OCT", CORE_OCT + ["oct_macular_classifier", "oct_mh_seg", "oct_fluid_seg"])

case("retinal_age_cfp", "Estimate the retinal age of this patient.", [
    img("retinal_age_cfp_img1", [("CFP", 0.996)], laterality=[("OS", 0.954)], screening=[("normal", 0.902)],
        outputs={"retinal_age_regressor": {"quantity": "retinal age", "value": 57.4, "unit": "years"}}),
], "normal", "CFP", CORE_FUNDUS + ["retinal_age_regressor"])

case("mild_npdr_cfp", "What is the diagnosis?", [
    img("mild_npdr_cfp_img1", [("CFP", 0.995)], laterality=[("OD", 0.924)], screening=[(DR, 0.772)],
        outputs={
            "dr_grader": cls(("mild non-proliferative diabetic retinopathy", 0.703)),
            "cfp_ma_seg": lesions(("microaneurysm", spread(4, 3.0, 41.5, "mild_ma"))),
        }),
], "mild non-proliferative diabetic retinopathy", "CFP",
    CORE_FUNDUS + ["dr_grader", "cfp_ma_seg", "cfp_hemorrhage_seg", "cfp_exudate_seg"])

# Outside the corpus: a text-only question.
case("text_only_csc", "What is central serous chorioretinopathy and how is it managed?", [], None, None, [],
     corpus=False)

# ---------------------------------------------------------------- knowledge base

KB = {
    "retinal_imaging_basics": """
Color fundus photography records the posterior pole of the eye as a single color image. The optic disc,
the macula, and the major retinal arcades are visible, and most screening programs for diabetic eye disease
rely on it. Image quality matters: small pupils, media opacities such as cataract, eyelashes, and dust on the
lens produce shadows and bright spots that a grader must not confuse with disease. Scanning laser
ophthalmoscopy builds the image point by point with a laser source, and ultra-widefield scanning laser
ophthalmoscopy captures up to two hundred degrees of retina in one frame, which helps with peripheral
lesions such as vein occlusion hemorrhages, retinal tears, and peripheral non-perfusion. Optical coherence
tomography produces cross-sectional scans of the retina with micrometre resolution and shows the retinal
layers, fluid, holes, and membranes at the macula. Fluorescein angiography follows an intravenous dye through
the retinal circulation; leakage, pooling, staining, blocked fluorescence, and capillary non-perfusion are
read from the sequence of frames. Indocyanine green angiography uses a dye that stays in the choroidal
circulation and is preferred for polypoidal choroidal vasculopathy. Fundus autofluorescence maps lipofuscin
in the retinal pigment epithelium and shows geographic atrophy as sharply demarcated dark areas.
Laterality is recorded as OD for the right eye and OS for the left eye, usually from the position of the
optic disc relative to the macula.
""",
    "diabetic_retinopathy": """
Diabetic retinopathy is a microvascular complication of diabetes and a leading cause of preventable vision
loss in working-age adults. The earliest sign is the microaneurysm, a small red dot arising from weakened
capillary walls. As the disease progresses, dot and blot hemorrhages, hard exudates from leaking lipoprotein,
cotton wool spots from nerve fiber layer infarcts, and venous beading appear. Grading separates
non-proliferative diabetic retinopathy into mild, moderate, and severe stages according to the number and
distribution of these lesions. Proliferative diabetic retinopathy is defined by neovascularization at the
disc or elsewhere, and it carries a high risk of vitreous hemorrhage and tractional retinal detachment.
Fluorescein angiography in proliferative disease shows profuse leakage from new vessels, areas of capillary
non-perfusion, and blocked fluorescence where preretinal hemorrhage lies in front of the retina.
Panretinal laser photocoagulation leaves round chorioretinal scars, called laser spots, in the peripheral
retina. Diabetic macular edema can occur at any stage and is assessed with optical coherence tomography.
Management of proliferative diabetic retinopathy includes prompt referral to a retina specialist for
panretinal photocoagulation or anti-VEGF injections, together with control of blood glucose, blood
pressure, and lipids. Mild non-proliferative disease is usually followed with annual examination.
""",
    "age_related_macular_degeneration": """
Age-related macular degeneration affects the central retina of older adults. Drusen are yellow deposits
between the retinal pigment epithelium and Bruch membrane; small drusen are common with age, while
medium and large drusen define early and intermediate AMD. Pigmentary change and increasing drusen
area raise the risk of progression. Late AMD takes two forms. Neovascular AMD, also called wet AMD, is
caused by choroidal neovascularization that leaks fluid and blood under or within the retina; optical
coherence tomography shows subretinal fluid, intraretinal fluid, and pigment epithelial detachment.
Geographic atrophy is the late dry form, with sharply bordered loss of the retinal pigment epithelium and
photoreceptors that appears dark on fundus autofluorescence. Intermediate AMD is managed with
antioxidant vitamin supplementation, smoking cessation, and home monitoring with an Amsler grid.
Neovascular AMD requires urgent referral for intravitreal anti-VEGF therapy, because delay leads to
permanent loss of central vision. Counting and measuring drusen on fundus photographs helps document
progression between visits.
""",
    "glaucoma": """
Glaucoma is a progressive optic neuropathy with characteristic cupping of the optic disc and matching
visual field loss. The cup-to-disc ratio is estimated from the optic disc and optic cup boundaries; a large or
asymmetric ratio, thinning of the neuroretinal rim, disc hemorrhage, and retinal nerve fiber layer defects
all suggest glaucomatous damage. Raised intraocular pressure is the main modifiable risk factor, but
damage can occur at normal pressure. A fundus photograph alone cannot confirm glaucoma; suspicious
discs are referred for tonometry, gonioscopy, perimetry, and optical coherence tomography of the nerve
fiber layer. Referable glaucoma on screening should be seen by an ophthalmologist, and treatment lowers
intraocular pressure with drops, laser trabeculoplasty, or surgery.
""",
    "retinal_vein_occlusion": """
Retinal vein occlusion is the second most common retinal vascular disease after diabetic retinopathy.
Central retinal vein occlusion affects the whole retina and shows dilated tortuous veins, flame-shaped and
blot hemorrhages in all four quadrants, cotton wool spots, and swelling of the optic disc. Branch retinal
vein occlusion is limited to the territory drained by one branch, typically at an arteriovenous crossing, and
the hemorrhages respect the horizontal raphe. Ischemic occlusions show extensive capillary non-perfusion on
fluorescein angiography and carry a risk of neovascularization and neovascular glaucoma. Macular edema is
the main cause of vision loss and is treated with intravitreal anti-VEGF agents or steroids. Patients with
vein occlusion should be assessed for hypertension, diabetes, hyperlipidemia, and raised intraocular pressure,
and followed closely for neovascular complications. Ultra-widefield imaging shows the peripheral extent of
hemorrhage and non-perfusion.
""",
    "macular_hole_and_interface": """
A macular hole is a defect of the neurosensory retina at the fovea. Optical coherence tomography separates
a full-thickness macular hole, in which all retinal layers are interrupted, from a lamellar macular hole, in
which part of the inner retina is lost but the outer retina is intact. Holes are staged by size and by the
state of the vitreous; vitreomacular traction often precedes hole formation. Intraretinal cystic spaces are
common at the hole edges. Full-thickness macular holes usually require vitrectomy with internal limiting
membrane peeling and gas tamponade, with high closure rates for small holes. An epiretinal membrane is a
fibrocellular sheet on the inner retinal surface that wrinkles the macula and causes distortion; surgery is
offered when vision or distortion becomes troublesome. Diabetic macular edema appears as retinal thickening
with intraretinal fluid and is treated with anti-VEGF injections when it involves the center.
""",
    "central_serous_chorioretinopathy": """
Central serous chorioretinopathy is a serous detachment of the neurosensory retina at the macula, usually in
young and middle-aged adults. Corticosteroid use and psychological stress are recognised associations. Optical
coherence tomography shows subretinal fluid and often a thick choroid. Fluorescein angiography may show an
ink-blot or smokestack leakage point. Acute central serous chorioretinopathy often resolves within a few months
without treatment, and management starts with stopping steroid medication where possible. Chronic disease with
persistent fluid can damage the photoreceptors and may be treated with photodynamic therapy or micropulse
laser. Patients should be reviewed with optical coherence tomography until the fluid resolves.
""",
    "pathologic_myopia": """
Pathologic myopia is high myopia with degenerative changes of the posterior segment caused by excessive
axial elongation of the eye. The eyeball becomes elongated and a posterior staphyloma may form. Myopic
maculopathy is graded from tessellated fundus through diffuse chorioretinal atrophy and patchy chorioretinal
atrophy to macular atrophy. Lacquer cracks, peripapillary atrophy, and myopic choroidal neovascularization are
additional signs. The choroid is markedly thinned, which can be followed with choroidal vascularity measures on
optical coherence tomography. Patients need regular retinal examination, prompt assessment of new distortion
for myopic choroidal neovascularization, and advice about the risk of retinal detachment.
""",
    "hypertensive_and_systemic": """
Retinal vessels offer a direct view of the microcirculation. Hypertensive retinopathy shows generalized
arteriolar narrowing, arteriovenous nicking where an arteriole crosses a venule, copper or silver wiring, and in
severe cases flame hemorrhages, cotton wool spots, and optic disc swelling. Vessel calibers are summarized as the
central retinal artery equivalent and the central retinal vein equivalent, and their ratio, the arteriole to venule
ratio, falls when arterioles narrow. A low arteriole to venule ratio, reduced vessel fractal dimension, and lower
vessel density have been associated with hypertension, stroke, and cardiovascular events. Retinal photographs can
therefore support cardiovascular risk stratification and estimation of retinal age, although they do not replace
blood pressure measurement and laboratory risk factors. Patients with signs of hypertensive retinopathy should have
their blood pressure checked and cardiovascular risk assessed.
""",
    "retinal_detachment_and_inflammation": """
Rhegmatogenous retinal detachment follows a retinal break that lets fluid pass under the neurosensory retina.
Symptoms include flashes, floaters, and a spreading shadow in the visual field. Ultra-widefield imaging shows the
elevated grey retina and the break in the periphery, and optical coherence tomography shows subretinal fluid and
retinal tears near the macula. Tractional retinal detachment occurs in proliferative diabetic retinopathy.
Rhegmatogenous detachment is a surgical emergency and needs same-day referral, especially while the macula is still
attached. Retinal vasculitis is inflammation of the retinal vessels; fluorescein angiography shows vessel wall
staining, leakage, and in occlusive retinal vasculitis large areas of capillary non-perfusion. Work-up looks for
infectious and systemic inflammatory causes before immunosuppressive treatment. Polypoidal choroidal vasculopathy
shows polyp-like dilations of the choroidal vessels on indocyanine green angiography and is treated with
photodynamic therapy combined with anti-VEGF injections.
""",
}

# ---------------------------------------------------------------- recommendations

RECOMMENDATIONS = {
    "default": "clinical correlation advised; follow up with an eye care professional",
    "conditions": {
        "normal": "routine follow-up; consult if symptomatic",
        DR: "refer to an ophthalmologist for diabetic retinopathy grading; optimise glycaemic and blood pressure control",
        "mild non-proliferative diabetic retinopathy": "annual diabetic eye screening; optimise glycaemic control",
        "moderate non-proliferative diabetic retinopathy": "retina review within 6 months; optimise glycaemic and blood pressure control",
        "severe non-proliferative diabetic retinopathy": "prompt retina referral; consider early panretinal photocoagulation",
        "proliferative diabetic retinopathy": "urgent retina referral for panretinal photocoagulation or anti-VEGF therapy",
        AMD: "refer for macular assessment with OCT",
        "early amd": "routine review in 12 months; smoking cessation",
        "intermediate amd": "antioxidant supplementation, Amsler grid home monitoring, review in 6 to 12 months",
        "neovascular amd": "urgent referral for intravitreal anti-VEGF therapy",
        GA: "low vision support and regular review; report new distortion promptly",
        GLAUCOMA: "refer for intraocular pressure measurement, perimetry and OCT of the nerve fibre layer",
        "referable glaucoma": "refer to a glaucoma clinic for full assessment",
        MYOPIA: "regular retinal review; report new distortion promptly for myopic choroidal neovascularization",
        RVO: "retina referral; check blood pressure, glucose and lipids",
        "central retinal vein occlusion": "retina referral within 2 weeks; monitor for neovascularization; systemic vascular work-up",
        "branch retinal vein occlusion": "retina referral; treat macular edema if present; systemic vascular work-up",
        CSC: "review with OCT in 6 to 8 weeks; stop corticosteroids where possible",
        MH: "refer to a vitreoretinal surgeon",
        "full-thickness macular hole": "refer to a vitreoretinal surgeon for vitrectomy assessment",
        "lamellar macular hole": "observation with periodic OCT; surgical review if vision declines",
        ERM: "observation; surgical referral if distortion affects daily activities",
        DME: "retina referral for anti-VEGF assessment",
        "center-involved diabetic macular edema": "retina referral for intravitreal anti-VEGF therapy",
        RD: "same-day vitreoretinal referral",
        HR: "blood pressure measurement and cardiovascular risk assessment",
        VASCULITIS: "uveitis referral with infectious and systemic work-up",
        PCV: "retina referral for photodynamic therapy combined with anti-VEGF",
    },
}

# ---------------------------------------------------------------- rubric

GENERIC_ITEMS = [
    ("modality", "Imaging modality is stated"),
    ("modality", "Modality confidence or source is given"),
    ("quality", "Image quality is stated"),
    ("quality", "Artifacts or gradability limits are described when present"),
    ("laterality", "Laterality is stated as right or left eye"),
    ("laterality", "Laterality source is given"),
    ("diagnosis", "A primary diagnosis is stated"),
    ("diagnosis", "Diagnostic confidence is stated"),
    ("diagnosis", "Relevant differential diagnoses are mentioned"),
    ("evidence", "Evidence items are linked to specific findings"),
    ("evidence", "Lesion counts are reported where lesions are present"),
    ("evidence", "Lesion sizes or areas are reported where lesions are present"),
    ("evidence", "Negative findings relevant to the question are reported"),
    ("recommendations", "A follow-up interval or urgency is given"),
    ("recommendations", "Referral destination is appropriate"),
    ("recommendations", "Patient advice is appropriate to the diagnosis"),
    ("recommendations", "Limits of image-based assessment are acknowledged"),
    ("reasoning", "Findings are reconciled when tools disagree"),
    ("reasoning", "The answer addresses the question asked"),
    ("reasoning", "Claims in the query are checked against the image"),
    ("reasoning", "Terminology is consistent across sections"),
]

CONDITION_FINDINGS = {
    DR: ["microaneurysms", "intraretinal hemorrhages", "hard exudates", "cotton wool spots", "venous beading",
         "neovascularization", "DR severity grade"],
    AMD: ["drusen", "drusen size category", "pigmentary change", "subretinal fluid", "intraretinal fluid",
          "pigment epithelial detachment", "AMD stage"],
    GLAUCOMA: ["cup-to-disc ratio", "neuroretinal rim thinning", "disc hemorrhage", "nerve fibre layer defect",
               "peripapillary atrophy", "disc asymmetry", "glaucoma risk level"],
    RVO: ["dilated tortuous veins", "hemorrhages by quadrant", "cotton wool spots", "optic disc swelling",
          "macular edema", "non-perfusion", "occlusion type"],
    MYOPIA: ["tessellation", "diffuse atrophy", "patchy atrophy", "lacquer cracks", "peripapillary atrophy",
             "staphyloma", "myopic maculopathy category"],
    CSC: ["subretinal fluid", "pigment epithelial detachment", "choroidal thickening", "leakage point",
          "fluid chronicity", "foveal involvement", "CSC subtype"],
    MH: ["hole full or partial thickness", "hole size", "hole edges", "intraretinal cysts", "vitreous attachment",
         "operculum", "macular hole stage"],
    ERM: ["membrane on inner surface", "retinal wrinkling", "central thickness", "foveal contour loss",
          "ectopic inner foveal layers", "vitreous state", "membrane severity"],
    DME: ["central thickening", "intraretinal fluid", "subretinal fluid", "hard exudates near fovea",
          "center involvement", "disorganisation of inner layers", "edema extent"],
    RD: ["elevated retina", "retinal break", "macula status", "subretinal fluid", "proliferative vitreoretinopathy",
         "detachment extent", "detachment type"],
    HR: ["arteriolar narrowing", "arteriovenous nicking", "copper or silver wiring", "vessel caliber values",
         "arteriole to venule ratio", "flame hemorrhages", "systemic risk level"],
    VASCULITIS: ["vessel wall staining", "leakage", "non-perfusion", "vascular sheathing", "macular edema",
                 "neovascularization", "vasculitis pattern"],
    PCV: ["polyps", "branching vascular network", "orange nodules", "pigment epithelial detachment",
          "subretinal hemorrhage", "fluid", "lesion activity"],
    GA: ["atrophy area", "foveal sparing", "junctional hyperautofluorescence", "multifocality", "growth pattern",
         "drusen elsewhere", "atrophy staging"],
    "normal": ["normal optic disc", "normal macula", "normal vessels", "no hemorrhages", "no exudates",
               "no detachment", "normal periphery"],
    "systemic": ["vessel area density", "fractal dimension", "retinal age", "cardiovascular risk level",
                 "risk horizon", "biomarker interpretation", "systemic referral advice"],
}
CONDITION_MANAGEMENT = [
    "Management matches {c} guidelines",
    "Urgency is appropriate for {c}",
    "Follow-up imaging for {c} is specified",
    "Systemic or associated factors for {c} are addressed",
]


def build_rubric():
    items = []
    for i, (section, text) in enumerate(GENERIC_ITEMS, 1):
        items.append({"item_id": f"G{i:03d}", "section": section, "description": text, "applicable_conditions": []})
    n = 0
    for cond, findings in CONDITION_FINDINGS.items():
        code = "".join(w[0] for w in cond.replace("-", " ").split()).upper()
        for f in findings:
            n += 1
            items.append({"item_id": f"C{n:03d}", "section": "evidence", "description": f"Reports {f}",
                          "applicable_conditions": [cond]})
        for tmpl in CONDITION_MANAGEMENT:
            n += 1
            items.append({"item_id": f"C{n:03d}", "section": "recommendations",
                          "description": tmpl.format(c=cond), "applicable_conditions": [cond]})
    return items


# ---------------------------------------------------------------- writers


def write_json(path, doc, indent=2):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=indent, ensure_ascii=False) + "\n")


SPECIALIST_DEFAULTS = {
    "dr_grader": "no diabetic retinopathy",
    "amd_stager": "no amd",
    "glaucoma_risk": "low glaucoma risk",
    "myopia_classifier": "no myopic maculopathy",
    "rvo_classifier": "no retinal vein occlusion",
    "csc_classifier": "no csc",
    "oct_macular_classifier": "no macular abnormality",
    "ffa_lesion_classifier": "no angiographic abnormality",
    "retinal_detachment_classifier": "no retinal detachment",
}

PARAMS = {"horizon5": {"horizon_years": 5}}


def main():
    for sub in ("fixtures", "cases", "kb", "artifacts"):
        shutil.rmtree(DATA / sub, ignore_errors=True)

    catalog = {
        "schema_version": "1.0",
        "notes": [
            "Tier membership is this catalog's taxonomy; only the per-tier counts are fixed.",
            "referral_triage stands in for the fifth general tool, whose identity is unpublished.",
        ],
        "tools": TOOLS,
    }
    write_json(DATA / "catalog.json", catalog)
    tiers = [sum(1 for t in TOOLS if t["tier"] <= k) for k in range(1, 6)]
    assert tiers == [5, 14, 35, 46, 53], tiers

    fixtures = {t["tool_id"]: {"tool_id": t["tool_id"], "entries": []} for t in TOOLS if t["backend"]["kind"] == "fixture"}
    for tid, label in SPECIALIST_DEFAULTS.items():
        fixtures[tid]["default_output"] = cls((label, 0.9))
    for t in TOOLS:
        if t["function"] == "segmentation":
            fixtures[t["tool_id"]]["default_output"] = empty_lesions(t["tool_id"])

    def add(tool_id, image_id, output, params=None):
        entry = {"image_id": image_id, "latency_ms": latency(tool_id, image_id), "output": output}
        if params:
            entry["params"] = params
        fixtures[tool_id]["entries"].append(entry)

    corpus_lines = []
    for c in CASES:
        images = []
        for im in c["images"]:
            iid = im["image_id"]
            ref = {"image_id": iid, "uri": f"fixture://{c['case_id']}/{iid}"}
            if im["hint"]:
                ref["modality_hint"] = im["hint"]
            if im["lat_hint"]:
                ref["laterality_hint"] = im["lat_hint"]
            images.append(ref)
            add("modality_classifier", iid, cls(*im["modality_preds"]))
            add("quality_assessor", iid, cls(im["quality"]))
            if im["laterality"]:
                add("laterality_classifier", iid, cls(*im["laterality"]))
            add("general_screener", iid, cls(*im["screening"]))
            add("referral_triage", iid, triage_for(im["screening"][0][0]))
            for key, out in im["outputs"].items():
                tid, params = (key[0], PARAMS[key[1]]) if isinstance(key, tuple) else (key, None)
                add(tid, iid, out, params)
        for gen_id, outs in c["generated"].items():
            for tid, out in outs.items():
                add(tid, gen_id, out)
        doc = {"case_id": c["case_id"], "images": images, "query": c["query"]}
        if c["gt"] is not None:
            doc["ground_truth"] = {"diagnosis": c["gt"], "expected_tools": c["expected"], "modality": c["gt_modality"]}
        write_json(DATA / "cases" / f"{c['case_id']}.json", doc)
        if c["corpus"]:
            corpus_lines.append(json.dumps(doc, ensure_ascii=False))
    assert len(corpus_lines) == 30, len(corpus_lines)
    (DATA / "corpus.jsonl").write_text("\n".join(corpus_lines) + "\n")

    for tid, doc in fixtures.items():
        doc["entries"].sort(key=lambda e: (e["image_id"], json.dumps(e.get("params", {}), sort_keys=True)))
        write_json(DATA / "fixtures" / f"{tid}.json", doc)

    # Placeholder files for generated artifacts referenced by fixtures.
    for doc in fixtures.values():
        for e in doc["entries"]:
            ref = e["output"].get("artifact_ref")
            if ref:
                write_json(DATA / ref, {"artifact_kind": e["output"]["artifact_kind"],
                                        "derived_from": e["output"]["derived_from"],
                                        "placeholder": True})

    for source, text in KB.items():
        (DATA / "kb").mkdir(parents=True, exist_ok=True)
        (DATA / "kb" / f"{source}.txt").write_text(" ".join(text.split()) + "\n")

    rubric = build_rubric()
    assert len(rubric) == 197, len(rubric)
    write_json(DATA / "rubric.json", {"rubric_version": "1.0", "items": rubric})
    write_json(DATA / "recommendations.json", RECOMMENDATIONS)
    print(f"catalog tiers {tiers}; {len(corpus_lines)} corpus cases; {len(rubric)} rubric items")


if __name__ == "__main__":
    main()
