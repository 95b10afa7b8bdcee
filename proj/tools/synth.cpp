// readmit-synth: writes the deterministic synthetic encounter file bundled
// with the repository. The layout mirrors the public diabetes encounter
// export: repeat visits for some patients, death/hospice dispositions, a
// weight column that is almost entirely missing, and a readmission status in
// {<30, >30, NO}. Six utilization counters carry the label signal so the
// selection stages have something real to find.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "readmit/core.hpp"

using readmit::Rng;

namespace {

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[rng.uniform_index(v.size())];
}

std::size_t weighted(Rng& rng, const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    double u = rng.u01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        if (u < acc) return i;
    }
    return w.size() - 1;
}

// non-negative counter, geometric-ish with the given mean
std::size_t skewed_count(Rng& rng, double mean, std::size_t cap) {
    double p = 1.0 / (1.0 + mean);
    std::size_t k = 0;
    while (k < cap && rng.u01() > p) ++k;
    return k;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generate the bundled synthetic encounter file"};
    std::size_t rows = 2600;
    std::uint64_t seed = 7;
    std::string out_path = "data/synthetic_encounters.csv";
    app.add_option("--rows", rows, "number of encounters");
    app.add_option("--seed", seed, "generator seed");
    app.add_option("--out", out_path, "output path");
    CLI11_PARSE(app, argc, argv);

    Rng rng(seed);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        std::cerr << "cannot write " << out_path << "\n";
        return 1;
    }

    out << "encounter_id,patient_nbr,race,gender,age,weight,admission_type_id,"
           "discharge_disposition_id,admission_source_id,time_in_hospital,payer_code,"
           "medical_specialty,num_lab_procedures,num_procedures,num_medications,"
           "number_outpatient,number_emergency,number_inpatient,number_diagnoses,"
           "max_glu_serum,A1Cresult,change,diabetesMed,readmitted\n";

    const std::vector<std::string> races{"Caucasian",  "AfricanAmerican", "Hispanic",
                                         "Other",      "Asian"};
    const std::vector<double> race_w{0.72, 0.18, 0.04, 0.04, 0.02};
    const std::vector<std::string> ages{"[10-20)", "[20-30)", "[30-40)", "[40-50)",
                                        "[50-60)", "[60-70)", "[70-80)", "[80-90)",
                                        "[90-100)"};
    const std::vector<double> age_w{0.01, 0.03, 0.06, 0.12, 0.20, 0.25, 0.20, 0.10, 0.03};
    const std::vector<std::string> weights{"[50-75)", "[75-100)", "[100-125)"};
    const std::vector<std::string> payers{"MC", "MD", "HM", "BC", "SP"};
    const std::vector<std::string> specialties{"InternalMedicine", "Cardiology",
                                               "Surgery-General",  "Family/GeneralPractice",
                                               "Emergency/Trauma", "Other"};
    const std::vector<std::string> dispositions{"1", "2", "3", "6", "18", "22", "25"};
    const std::vector<std::string> glu{"None", "Norm", ">200", ">300"};
    const std::vector<double> glu_w{0.82, 0.09, 0.06, 0.03};
    const std::vector<std::string> a1c{"None", "Norm", ">7", ">8"};
    const std::vector<double> a1c_w{0.81, 0.06, 0.06, 0.07};

    std::vector<long long> patients;
    long long next_patient = 10001;
    long long encounter = 500001;

    for (std::size_t i = 0; i < rows; ++i) {
        long long patient;
        if (!patients.empty() && rng.u01() < 0.08) {
            patient = patients[rng.uniform_index(patients.size())];  // repeat visit
        } else {
            patient = next_patient++;
            patients.push_back(patient);
        }

        std::size_t inpatient = skewed_count(rng, 0.6, 8);
        std::size_t emergency = skewed_count(rng, 0.55, 8);
        std::size_t outpatient = skewed_count(rng, 0.7, 10);
        std::size_t procedures = skewed_count(rng, 1.4, 5);
        std::size_t medications = 1 + skewed_count(rng, 14.0, 35);
        std::size_t diagnoses = 1 + skewed_count(rng, 6.0, 15);
        std::size_t labs = 1 + skewed_count(rng, 42.0, 80);
        std::size_t tih = 1 + skewed_count(rng, 3.3, 13);

        // label signal: heavier utilization raises the readmission odds
        double eta = -3.90 + 1.00 * static_cast<double>(inpatient) +
                     1.10 * static_cast<double>(emergency) +
                     0.75 * static_cast<double>(outpatient) +
                     0.20 * (static_cast<double>(diagnoses) - 6.0) +
                     0.095 * (static_cast<double>(medications) - 15.0) -
                     1.00 * static_cast<double>(procedures);
        bool readmitted = rng.u01() < readmit::sigmoid(eta);
        std::string status = readmitted ? (rng.u01() < 0.75 ? "<30" : ">30")
                                        : (rng.u01() < 0.07 ? ">30" : "NO");

        bool died = rng.u01() < 0.03;
        std::string disposition =
            died ? (rng.u01() < 0.6 ? "11" : (rng.u01() < 0.5 ? "13" : "14"))
                 : pick(rng, dispositions);

        out << encounter++ << ',' << patient << ','
            << (rng.u01() < 0.02 ? "?" : races[weighted(rng, race_w)]) << ','
            << (rng.u01() < 0.53 ? "Female" : "Male") << ',' << ages[weighted(rng, age_w)]
            << ',' << (rng.u01() < 0.97 ? "?" : pick(rng, weights)) << ','
            << (1 + rng.uniform_index(8)) << ',' << disposition << ','
            << (1 + rng.uniform_index(9)) << ',' << tih << ','
            << (rng.u01() < 0.40 ? "?" : pick(rng, payers)) << ','
            << (rng.u01() < 0.47 ? "?" : pick(rng, specialties)) << ',' << labs << ','
            << procedures << ',' << medications << ',' << outpatient << ',' << emergency
            << ',' << inpatient << ',' << diagnoses << ',' << glu[weighted(rng, glu_w)] << ','
            << a1c[weighted(rng, a1c_w)] << ',' << (rng.u01() < 0.45 ? "Ch" : "No") << ','
            << (rng.u01() < 0.77 ? "Yes" : "No") << ',' << status << '\n';
    }
    std::cout << "wrote " << rows << " encounters to " << out_path << "\n";
    return 0;
}
