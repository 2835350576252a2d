// 100 draws from GPD(mu=225, sigma=31.5, xi=0.2), numpy default_rng(20240901).
#ifndef SKYLINE_TEST_GPD_SAMPLE100_HPP_
#define SKYLINE_TEST_GPD_SAMPLE100_HPP_

#include <array>

inline constexpr std::array<double, 100> kGpdSample100 = {
    252.26093524218351, 256.70981046306605, 288.5233208765182, 241.27923179695838,
    234.25195655262311, 245.15749863266345, 237.91731084293792, 378.30555150210159,
    225.9323917363877, 238.7750521224369, 228.07760051056181, 272.11263305041678,
    243.98587446843175, 248.80048402596421, 388.45597620049267, 263.98449975289316,
    310.91656038519682, 264.44835930646144, 247.80355750158716, 235.39612015289543,
    266.37787015319293, 255.89714556896334, 310.48622997760054, 273.08487992588209,
    236.86044288403878, 294.80247454816703, 260.73936249818308, 231.10315272885356,
    235.61195658513481, 285.28254621266728, 228.60114748568768, 251.04687613525201,
    247.8500156180925, 239.76907807480933, 262.73427499224681, 273.14312386298297,
    259.15652167591492, 345.75550656162119, 271.20595368767431, 303.29107878482313,
    332.06147325739795, 231.20757622126092, 299.49765309204304, 227.38075946770732,
    244.36441426767755, 257.10207846008643, 235.02782917814645, 299.66657315166691,
    237.61998645155373, 236.77248243270878, 256.13073725132557, 249.64519713750283,
    227.37222559259718, 266.84568025862035, 231.66806964985943, 232.76736102394958,
    227.04654722098954, 268.34611651018571, 250.57477928404683, 240.25329107691104,
    226.12244685842276, 241.47474851540775, 274.54607776664807, 238.03045107348171,
    229.7381980571912, 274.0635300341454, 249.4829015448685, 241.84596765597567,
    226.5909059970283, 259.8756015709875, 230.51313124276692, 241.05223951696934,
    236.57654234664452, 522.41727128939192, 243.56374694240026, 256.17185558733587,
    244.313999353649, 230.07376155653554, 249.51873337932827, 248.19423161509937,
    250.18112014315776, 230.0714790261209, 254.1776093636704, 239.77989458663416,
    512.09872240009793, 241.59159803478144, 286.19594815842908, 263.08838128691144,
    266.42640934213301, 234.15373249089873, 311.75541605297195, 250.21485901072694,
    237.35925178023328, 279.82978741844454, 236.71174901613318, 257.48771497914498,
    249.29276580444454, 254.3986887314573, 241.66522091495128, 347.00378438432159,
};

#endif  // SKYLINE_TEST_GPD_SAMPLE100_HPP_
